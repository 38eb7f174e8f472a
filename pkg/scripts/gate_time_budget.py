"""Per-step duration budget of the six-step protocol and its conversion to nanoseconds.

The total is pi/(2 omega_mw) + pi/omega_drive + 2 pi/delta.  Two readings of
a 1 GHz detuning are shown because the unit convention changes the answer by
2 pi.
"""
import argparse
import math

from ccagate.model import SystemParams
from ccagate.protocol import run_protocol, total_gate_time


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--omega-mw", type=float, default=10.0, help="in units of delta")
    ap.add_argument("--drive", type=float, default=100.0, help="in units of delta")
    ap.add_argument("--delta-hz", type=float, default=1e9)
    args = ap.parse_args(argv)

    p = SystemParams(g=0.1, nu=10.0, omega_drive=args.drive, omega_mw=args.omega_mw)
    _, trace = run_protocol(p, "analytic")
    print("step  duration/delta^-1")
    for rec in trace.records:
        print(f"{rec.step:>4d}  {rec.duration:.6f}")
    total = total_gate_time(p)
    print(f"total {trace.total_duration:.6f}  (formula {total:.6f})")
    for label, delta in (("delta = 2pi f", 2 * math.pi * args.delta_hz),
                         ("delta = f rad/s", args.delta_hz)):
        print(f"{label:>16s}: {total / delta * 1e9:.4f} ns")


if __name__ == "__main__":
    main()
