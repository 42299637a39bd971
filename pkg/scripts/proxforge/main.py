#!/usr/bin/env python3
"""
Main entry point for proxforge.

    python main.py generate --scenes scenes.json --depth-dir depth/ --out train.jsonl --seed 7
"""

from proxforge.cli import main

if __name__ == "__main__":
    main()
