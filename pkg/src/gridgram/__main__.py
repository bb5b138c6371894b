"""Module entry point so ``python -m gridgram`` behaves like the console script."""

from gridgram.cli import main

raise SystemExit(main())
