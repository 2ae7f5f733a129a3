# -*- coding: utf-8 -*-
"""Allow ``python -m vipelab``."""

from .cli import main

if __name__ == '__main__':
    main()
