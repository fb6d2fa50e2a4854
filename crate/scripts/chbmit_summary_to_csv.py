#!/usr/bin/env python3
"""Convert CHB-MIT chbXX-summary.txt files to the annotation CSV read by
`rsel features` (recording_id,onset_sec,offset_sec)."""

import re
import sys
from pathlib import Path

FILE = re.compile(r"^File Name:\s*(\S+)\.edf", re.I)
START = re.compile(r"^Seizure(?:\s+\d+)?\s+Start Time:\s*(\d+(?:\.\d+)?)\s*seconds", re.I)
END = re.compile(r"^Seizure(?:\s+\d+)?\s+End Time:\s*(\d+(?:\.\d+)?)\s*seconds", re.I)


def convert(text):
    rows, current, onset = [], None, None
    for line in text.splitlines():
        line = line.strip()
        if m := FILE.match(line):
            current, onset = m.group(1), None
        elif m := START.match(line):
            onset = m.group(1)
        elif (m := END.match(line)) and current and onset is not None:
            rows.append(f"{current},{onset},{m.group(1)}")
            onset = None
    return rows


def main(argv):
    if len(argv) < 2:
        print("usage: chbmit_summary_to_csv.py SUMMARY.txt... > seizures.csv", file=sys.stderr)
        return 2
    print("# recording_id,onset_sec,offset_sec")
    for path in argv[1:]:
        for row in convert(Path(path).read_text(errors="replace")):
            print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
