#!/usr/bin/env python3
"""Fallback .tex display transformation: an HTML (or XHTML) page holding
the escaped source, so pages render without any LaTeX toolchain installed."""

import html
import os
import sys

HTML_TEMPLATE = """<div class="tex-render"><pre>%s</pre></div>
"""

XHTML_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<div xmlns="http://www.w3.org/1999/xhtml" class="tex-render"><pre>%s</pre></div>
"""


def main():
    args = sys.argv[1:]
    xhtml = False
    if args and args[0] == "--xhtml":
        xhtml = True
        args = args[1:]
    if len(args) != 2:
        sys.stderr.write("usage: tex_to_html.py [--xhtml] SOURCE TARGET\n")
        return 2
    source, target = args
    with open(source, "r", encoding="utf-8", errors="replace") as f:
        text = f.read()
    template = XHTML_TEMPLATE if xhtml else HTML_TEMPLATE
    with open(target, "w", encoding="utf-8") as f:
        f.write(template % html.escape(text))
    log = os.environ.get("WW_RECIPE_LOG")
    if log:
        with open(log, "a") as f:
            f.write("tex_to_html %s -> %s\n" % (source, target))
    return 0


if __name__ == "__main__":
    sys.exit(main())
