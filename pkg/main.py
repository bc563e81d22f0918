#!/usr/bin/env python3
"""
modlattice_cal - メインプログラム

    python main.py run configs/awgn_baseline.yaml [--seed N] [--out DIR] [--bits] [--workers N]
    python main.py sweep configs/awgn_baseline.yaml --param channel.noise_var --values 0.1,0.3,1,3,10
"""

import sys

from modlattice_cal.cli import main


if __name__ == '__main__':
    sys.exit(main())
