"""
Five-Field Dissipative Fluid Toolkit - Entry Point
Configures logging and dispatches to the command line (check, equivalence,
entropy, simulate, sweep)
"""

import logging
import sys

from config import settings

logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def main() -> int:
    """Run one toolkit command and return its exit code"""
    import cli

    print("\n" + "="*70)
    print("Causal Five-Field Relativistic Fluid Toolkit")
    print("="*70)
    return cli.main()


if __name__ == "__main__":
    sys.exit(main())
