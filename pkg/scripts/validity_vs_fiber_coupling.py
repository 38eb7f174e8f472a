"""Full-mode step-3 fidelity against the dispersive prediction as the fiber coupling varies.

Writes one CSV row per nu/g ratio: the worst of the four basis-input state
fidelities and the regime status.  The curve is not monotone near
sqrt(2) nu ~ delta, where a split normal mode becomes resonant with the drive
detuning.
"""
import argparse
import csv
import sys

from ccagate.analysis import regime_status
from ccagate.model import SystemParams
from ccagate.protocol import interaction_fidelities


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--g", type=float, default=0.1, help="coupling in units of delta")
    ap.add_argument("--ratios", type=float, nargs="+", default=[1, 2, 5, 10, 20, 50, 100])
    ap.add_argument("--drive", type=float, default=50.0)
    ap.add_argument("--cutoff-c", type=int, default=5)
    ap.add_argument("--cutoff-pm", type=int, default=4)
    ap.add_argument("--out", help="CSV path (stdout if omitted)")
    args = ap.parse_args(argv)

    base = SystemParams(g=args.g, nu=args.g, omega_drive=args.drive, omega_mw=10.0,
                        cutoff_full_c=args.cutoff_c, cutoff_pm=args.cutoff_pm)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(fh)
    writer.writerow(["nu_over_g", "nu", "min_fidelity", "regime"])
    for r in args.ratios:
        p = base.replace(nu=r * args.g)
        fid = min(interaction_fidelities(p, "full").values())
        writer.writerow([f"{r:g}", f"{p.nu:.6g}", f"{fid:.10f}", regime_status(p, "full")])
        fh.flush()
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
