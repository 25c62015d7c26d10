"""Entry point for ``python -m staged_pbr`` and the ``spbr`` script."""

from __future__ import annotations

import sys
from typing import Optional, Sequence

from staged_pbr.interfaces.cli import main as cli_main


def main(argv: Optional[Sequence[str]] = None) -> int:
    return cli_main(argv if argv is not None else sys.argv[1:])


if __name__ == "__main__":  # pragma: no cover - manual execution
    sys.exit(main())
