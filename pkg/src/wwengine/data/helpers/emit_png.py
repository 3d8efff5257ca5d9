#!/usr/bin/env python3
"""Deterministic stand-in for a graphics toolchain: writes a fixed valid
PNG no matter what the input says.  Appends a line to $WW_RECIPE_LOG when
that variable is set, so tests can count recipe executions."""

import base64
import os
import sys

PNG_1PX = base64.b64decode(
    b"iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJ"
    b"AAAADUlEQVR42mNk+M9QDwADhgGAWjR9awAAAABJRU5ErkJggg=="
)


def main():
    if len(sys.argv) != 3:
        sys.stderr.write("usage: emit_png.py SOURCE TARGET\n")
        return 2
    source, target = sys.argv[1], sys.argv[2]
    if not os.path.exists(source):
        sys.stderr.write("emit_png: no such source %s\n" % source)
        return 1
    with open(target, "wb") as f:
        f.write(PNG_1PX)
    log = os.environ.get("WW_RECIPE_LOG")
    if log:
        with open(log, "a") as f:
            f.write("emit_png %s -> %s\n" % (source, target))
    return 0


if __name__ == "__main__":
    sys.exit(main())
