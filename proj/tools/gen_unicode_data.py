#!/usr/bin/env python3
"""Regenerates src/unicode_data.inc from Python's unicodedata.

Tables emitted (all sorted for binary search):
  - canonical decomposition (fully expanded NFD), Hangul excluded (algorithmic)
  - canonical combining classes (nonzero only)
  - primary composite pairs (composition exclusions already filtered out)
  - simple/full lowercase mappings
  - White_Space codepoints

Usage: python3 tools/gen_unicode_data.py > src/unicode_data.inc
"""

import sys
import unicodedata

MAX_CP = 0x110000
HANGUL_BASE, HANGUL_END = 0xAC00, 0xD7A4


def main() -> None:
    nfd_pool: list[int] = []
    nfd_entries: list[tuple[int, int, int]] = []
    ccc_entries: list[tuple[int, int]] = []
    comp_entries: list[tuple[int, int, int]] = []
    lower_pool: list[int] = []
    lower_entries: list[tuple[int, int, int]] = []
    ws: list[int] = []

    for cp in range(MAX_CP):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        ch = chr(cp)

        ccc = unicodedata.combining(ch)
        if ccc:
            ccc_entries.append((cp, ccc))

        if not (HANGUL_BASE <= cp < HANGUL_END):
            nfd = unicodedata.normalize("NFD", ch)
            if nfd != ch:
                cps = [ord(c) for c in nfd]
                nfd_entries.append((cp, len(nfd_pool), len(cps)))
                nfd_pool.extend(cps)

            raw = unicodedata.decomposition(ch)
            if raw and not raw.startswith("<"):
                parts = [int(p, 16) for p in raw.split()]
                if len(parts) == 2:
                    # primary composite iff NFC recomposes the pair to cp
                    pair = chr(parts[0]) + chr(parts[1])
                    if unicodedata.normalize("NFC", pair) == ch:
                        comp_entries.append((parts[0], parts[1], cp))

        low = ch.lower()
        if low != ch:
            cps = [ord(c) for c in low]
            lower_entries.append((cp, len(lower_pool), len(cps)))
            lower_pool.extend(cps)

        if ch.isspace() and unicodedata.category(ch) != "Cc":
            ws.append(cp)
    # control-range whitespace (tab, LF, VT, FF, CR, NEL)
    ws = sorted(set(ws) | {0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x85})

    comp_entries.sort(key=lambda e: (e[0], e[1]))

    out = sys.stdout
    out.write("// Generated by tools/gen_unicode_data.py (unicodedata %s). Do not edit.\n"
              % unicodedata.unidata_version)
    out.write("// clang-format off\n")

    def dump_u32(name: str, vals: list[int]) -> None:
        out.write(f"static const uint32_t {name}[] = {{\n")
        for i in range(0, len(vals), 12):
            out.write("  " + ",".join("0x%X" % v for v in vals[i:i + 12]) + ",\n")
        out.write("};\n")

    dump_u32("kNfdPool", nfd_pool)
    out.write("struct SeqEntry { uint32_t cp; uint32_t offset; uint8_t len; };\n")
    out.write("static const SeqEntry kNfd[] = {\n")
    for cp, off, n in nfd_entries:
        out.write("  {0x%X,%d,%d},\n" % (cp, off, n))
    out.write("};\n")

    out.write("struct CccEntry { uint32_t cp; uint8_t ccc; };\n")
    out.write("static const CccEntry kCcc[] = {\n")
    for cp, c in ccc_entries:
        out.write("  {0x%X,%d},\n" % (cp, c))
    out.write("};\n")

    out.write("struct CompEntry { uint32_t first; uint32_t second; uint32_t composed; };\n")
    out.write("static const CompEntry kComp[] = {\n")
    for a, b, c in comp_entries:
        out.write("  {0x%X,0x%X,0x%X},\n" % (a, b, c))
    out.write("};\n")

    dump_u32("kLowerPool", lower_pool)
    out.write("static const SeqEntry kLower[] = {\n")
    for cp, off, n in lower_entries:
        out.write("  {0x%X,%d,%d},\n" % (cp, off, n))
    out.write("};\n")

    dump_u32("kWhitespace", ws)
    out.write("// clang-format on\n")


if __name__ == "__main__":
    main()
