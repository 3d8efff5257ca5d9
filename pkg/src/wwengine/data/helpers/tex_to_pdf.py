#!/usr/bin/env python3
"""Fallback .tex -> .pdf rule: assembles a minimal single-page PDF whose
text stream contains the first line of the source.  Valid enough for any
PDF reader; replaced by pdflatex in real deployments."""

import os
import sys


def build_pdf(first_line: str) -> bytes:
    safe = first_line.replace("\\", "").replace("(", "[").replace(")", "]")
    stream = ("BT /F1 12 Tf 72 720 Td (%s) Tj ET" % safe[:80]).encode("latin-1",
                                                                      "replace")
    objects = [
        b"<</Type/Catalog/Pages 2 0 R>>",
        b"<</Type/Pages/Kids[3 0 R]/Count 1>>",
        b"<</Type/Page/Parent 2 0 R/MediaBox[0 0 612 792]"
        b"/Resources<</Font<</F1 4 0 R>>>>/Contents 5 0 R>>",
        b"<</Type/Font/Subtype/Type1/BaseFont/Helvetica>>",
        b"<</Length %d>>stream\n%s\nendstream" % (len(stream), stream),
    ]
    out = bytearray(b"%PDF-1.4\n")
    offsets = []
    for i, body in enumerate(objects, start=1):
        offsets.append(len(out))
        out += b"%d 0 obj\n%s\nendobj\n" % (i, body)
    xref_at = len(out)
    out += b"xref\n0 %d\n" % (len(objects) + 1)
    out += b"0000000000 65535 f \n"
    for off in offsets:
        out += b"%010d 00000 n \n" % off
    out += b"trailer\n<</Size %d/Root 1 0 R>>\nstartxref\n%d\n%%%%EOF\n" % (
        len(objects) + 1, xref_at)
    return bytes(out)


def main():
    if len(sys.argv) != 3:
        sys.stderr.write("usage: tex_to_pdf.py SOURCE TARGET\n")
        return 2
    source, target = sys.argv[1], sys.argv[2]
    with open(source, "r", encoding="utf-8", errors="replace") as f:
        first = f.readline().strip() or "(empty document)"
    with open(target, "wb") as f:
        f.write(build_pdf(first))
    log = os.environ.get("WW_RECIPE_LOG")
    if log:
        with open(log, "a") as f:
            f.write("tex_to_pdf %s -> %s\n" % (source, target))
    return 0


if __name__ == "__main__":
    sys.exit(main())
