#!/usr/bin/env python3
import sys

from . import AppMain

if __name__ == "__main__":
    sys.exit(AppMain.main())
