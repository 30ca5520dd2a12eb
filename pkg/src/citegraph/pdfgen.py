"""Minimal deterministic PDF 1.4 writer: one base font, explicit xref table.

Output for a fixed input is byte-identical, which keeps artifact fingerprints
stable across runs.
"""

from __future__ import annotations

LINE_HEIGHT = 14
PAGE_WIDTH = 612
PAGE_HEIGHT = 792
MARGIN = 54
LINES_PER_PAGE = (PAGE_HEIGHT - 2 * MARGIN) // LINE_HEIGHT
MAX_CHARS = 92


def _escape(text: str) -> str:
    out = []
    for ch in text:
        if ch in "\\()":
            out.append("\\" + ch)
        elif 32 <= ord(ch) < 127:
            out.append(ch)
        else:
            out.append("?")  # WinAnsi subset only; keeps the writer dependency-free
    return "".join(out)


def wrap_text(text: str, width: int = MAX_CHARS) -> list[str]:
    lines: list[str] = []
    for para in text.splitlines() or [""]:
        words = para.split()
        if not words:
            lines.append("")
            continue
        cur = words[0]
        for w in words[1:]:
            if len(cur) + 1 + len(w) <= width:
                cur += " " + w
            else:
                lines.append(cur)
                cur = w
        lines.append(cur)
    return lines


def render_pdf(lines: list[str]) -> bytes:
    """Render pre-wrapped text lines into a paginated PDF byte stream."""
    pages = [lines[i:i + LINES_PER_PAGE] for i in range(0, len(lines), LINES_PER_PAGE)] or [[]]

    objects: list[bytes] = []  # object number = position + 1
    font_obj = 3 + 2 * len(pages)
    kids = " ".join(f"{3 + 2 * i} 0 R" for i in range(len(pages)))
    objects.append(b"<< /Type /Catalog /Pages 2 0 R >>")
    objects.append(f"<< /Type /Pages /Kids [{kids}] /Count {len(pages)} >>".encode())
    for i, page_lines in enumerate(pages):
        page_num = 3 + 2 * i
        content_num = page_num + 1
        objects.append(
            (f"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 {PAGE_WIDTH} {PAGE_HEIGHT}] "
             f"/Contents {content_num} 0 R "
             f"/Resources << /Font << /F1 {font_obj} 0 R >> >> >>").encode())
        body = [f"BT /F1 11 Tf {MARGIN} {PAGE_HEIGHT - MARGIN} Td {LINE_HEIGHT} TL"]
        for line in page_lines:
            body.append(f"({_escape(line)}) Tj T*")
        body.append("ET")
        stream = "\n".join(body).encode("latin-1", errors="replace")
        objects.append(b"<< /Length " + str(len(stream)).encode() + b" >>\nstream\n"
                       + stream + b"\nendstream")
    objects.append(b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica >>")

    out = bytearray(b"%PDF-1.4\n")
    offsets = [0]
    for num, obj in enumerate(objects, start=1):
        offsets.append(len(out))
        out += f"{num} 0 obj\n".encode() + obj + b"\nendobj\n"
    xref_pos = len(out)
    n = len(objects) + 1
    out += f"xref\n0 {n}\n".encode()
    out += b"0000000000 65535 f \n"
    for off in offsets[1:]:
        out += f"{off:010d} 00000 n \n".encode()
    out += (f"trailer\n<< /Size {n} /Root 1 0 R >>\nstartxref\n{xref_pos}\n").encode()
    out += b"%%EOF"
    return bytes(out)


def case_pdf(case_name: str, justice: str, year: int, source_url: str,
             description: str) -> bytes:
    """PDF for one case: header lines then the wrapped opinion text."""
    lines = [case_name, f"Justice: {justice}", f"Year: {year}"]
    if source_url:
        lines.append(f"Source: {source_url}")
    lines.append("")
    lines.extend(wrap_text(description))
    return render_pdf(lines)
