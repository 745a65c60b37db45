"""Stand-in encoder/decoder commands for hermetic runs.

    python -m ctp_bench.mockcodec encode --preset medium [--Key[=V] ...] --qp 27 -i SRC -b OUT
    python -m ctp_bench.mockcodec decode -b OUT

The encoder derives bitrate, PSNR, encode time and decode time
deterministically from the source name, preset, tool options and QP, writes
a bitstream whose first line is a JSON header, and prints one summary line
that ``parse_encoder_log`` understands. Special options: ``--MockFailQP=<qp>``
makes the encode exit nonzero at that QP; ``--MockFailDecode=1`` produces a
bitstream the decoder rejects.

Only the standard library is imported so each invocation starts fast.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from pathlib import Path

PRESET_SPEED = {"faster": 0.25, "fast": 0.45, "medium": 1.0, "slow": 2.4, "slower": 6.0}


def _unit(*parts) -> float:
    """Deterministic value in [0, 1) from the given parts."""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "big") / 2.0 ** 64


def parse_encode_args(argv):
    preset, qp, src, out = "medium", None, None, None
    options = {}
    i = 0
    while i < len(argv):
        a = argv[i]
        if a == "--preset":
            preset = argv[i + 1]
            i += 2
        elif a == "--qp":
            qp = int(argv[i + 1])
            i += 2
        elif a == "-i":
            src = argv[i + 1]
            i += 2
        elif a == "-b":
            out = argv[i + 1]
            i += 2
        elif a.startswith("--"):
            key, _, value = a[2:].partition("=")
            options[key] = value if value else "flag"
            i += 1
        else:
            i += 1
    if qp is None or src is None or out is None:
        raise SystemExit("mock encoder: --qp, -i and -b are required")
    return preset, options, qp, src, out


def model(source: str, preset: str, options: dict, qp: int) -> dict:
    seq = Path(source).name
    r0 = 800.0 + 5200.0 * _unit("rate", seq)
    p0 = 38.0 + 6.0 * _unit("psnr", seq)
    slope = 0.40 + 0.15 * _unit("slope", seq)
    rate_mult = energy_mult = time_mult = 1.0
    for key, value in sorted(options.items()):
        if key.startswith("Mock") or key == "PerceptQPA":
            continue
        rate_mult *= 0.985 + 0.045 * _unit("r", key, value)
        energy_mult *= 0.90 + 0.12 * _unit("e", key, value)
        time_mult *= 0.92 + 0.14 * _unit("t", key, value)
    dq = qp - 22
    bitrate = r0 * rate_mult * 2.0 ** (-dq / 5.0)
    psnr_y = p0 - slope * dq
    decode_s = 0.4 * energy_mult * (bitrate / r0) ** 0.35
    encode_s = 30.0 * PRESET_SPEED.get(preset, 1.0) * time_mult * (1.0 + (37 - qp) / 30.0)
    return {
        "bitrate_kbps": round(bitrate, 4),
        "psnr_y": round(psnr_y, 4),
        "psnr_u": round(psnr_y + 2.0 + 0.5 * _unit("u", seq), 4),
        "psnr_v": round(psnr_y + 2.3 + 0.5 * _unit("v", seq), 4),
        "encode_s": round(encode_s, 3),
        "decode_s": round(decode_s, 6),
    }


def encode(argv) -> int:
    preset, options, qp, src, out = parse_encode_args(argv)
    fail_qp = options.get("MockFailQP")
    if fail_qp is not None and fail_qp != "flag" and int(fail_qp) == qp:
        print(f"mock encoder: injected failure at qp {qp}", file=sys.stderr)
        return 3
    m = model(src, preset, options, qp)
    header = {"mock_bitstream": 1, "qp": qp, "decode_s": m["decode_s"], "bitrate_kbps": m["bitrate_kbps"]}
    if options.get("MockFailDecode") not in (None, "0"):
        header["fail_decode"] = True
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
    print(f"mock encoder preset={preset} qp={qp} tools={len(options)}")
    print(f"Bitrate {m['bitrate_kbps']:.4f} kbps, Y {m['psnr_y']:.4f} U {m['psnr_u']:.4f} "
          f"V {m['psnr_v']:.4f}, Time {m['encode_s']:.3f} s")
    return 0


def decode(argv) -> int:
    if "-b" not in argv:
        print("mock decoder: -b <bitstream> required", file=sys.stderr)
        return 2
    path = argv[argv.index("-b") + 1]
    try:
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
    except (OSError, ValueError) as exc:
        print(f"mock decoder: cannot read {path}: {exc}", file=sys.stderr)
        return 1
    if header.get("fail_decode"):
        print("mock decoder: corrupt bitstream", file=sys.stderr)
        return 1
    # real sleeping only when asked, so a real meter sees a decode-shaped load
    scale = float(os.environ.get("CTP_BENCH_MOCK_SLEEP", "0") or 0)
    if scale > 0:
        time.sleep(header.get("decode_s", 0.0) * scale)
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("encode", "decode"):
        print("usage: python -m ctp_bench.mockcodec encode|decode ...", file=sys.stderr)
        return 2
    return encode(argv[1:]) if argv[0] == "encode" else decode(argv[1:])


if __name__ == "__main__":
    sys.exit(main())
