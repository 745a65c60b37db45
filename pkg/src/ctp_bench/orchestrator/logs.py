"""Encoder log parsing: the mock encoder's one-line summary and VVenC/VTM summary blocks."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..errors import UnparseableLog

_NUM = r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?"

MOCK_RE = re.compile(
    rf"Bitrate\s+(?P<rate>{_NUM})\s*kbps,\s*Y\s+(?P<y>{_NUM})\s+U\s+(?P<u>{_NUM})\s+V\s+(?P<v>{_NUM})"
    rf"(?:,\s*Time\s+(?P<time>{_NUM})\s*s)?"
)
_SUMMARY_HEADER_RE = re.compile(r"Total Frames\s*\|\s*Bitrate\s+Y-PSNR\s+U-PSNR\s+V-PSNR")
_SUMMARY_ROW_RE = re.compile(rf"^\D*?(\d+)\s+a\s+({_NUM})\s+({_NUM})\s+({_NUM})\s+({_NUM})")
_TIME_ELAPSED_RE = re.compile(rf"Total Time:\s*({_NUM})\s*sec\.?\s*\[user\]\s*({_NUM})\s*sec\.?\s*\[elapsed\]")
_TIME_PLAIN_RE = re.compile(rf"Total Time:\s*({_NUM})\s*sec")


@dataclass(frozen=True)
class EncoderSummary:
    bitrate_kbps: float
    psnr_y: float
    psnr_u: float
    psnr_v: float
    encode_s: Optional[float]


def parse_encoder_log(text: str, log_path=None) -> EncoderSummary:
    m = MOCK_RE.search(text)
    if m:
        t = m.group("time")
        return EncoderSummary(float(m.group("rate")), float(m.group("y")), float(m.group("u")),
                              float(m.group("v")), float(t) if t is not None else None)

    lines = text.splitlines()
    for i, line in enumerate(lines):
        if not _SUMMARY_HEADER_RE.search(line):
            continue
        # the overall summary row follows its header; per-slice-type blocks come later
        for row in lines[i + 1:i + 3]:
            r = _SUMMARY_ROW_RE.search(row)
            if r:
                m_el = _TIME_ELAPSED_RE.search(text)
                m_pl = _TIME_PLAIN_RE.search(text)
                seconds = float(m_el.group(2)) if m_el else (float(m_pl.group(1)) if m_pl else None)
                return EncoderSummary(float(r.group(2)), float(r.group(3)), float(r.group(4)),
                                      float(r.group(5)), seconds)
        break
    raise UnparseableLog("no bitrate/PSNR summary found in encoder log", log_path)
