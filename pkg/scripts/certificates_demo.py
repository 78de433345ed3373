"""Check both Lyapunov certificates along simulated trajectories.

Constant disturbance without leakage: V must never increase and e, u_f
must vanish. Sinusoidal disturbance with leakage: V must stay under the
exponential envelope.
"""

import argparse

import numpy as np

from symbiotic.certificates import certificate_report
from symbiotic.model import NominalGains, PlantModel, SymbioticConfig, assemble_closed_loop
from symbiotic.simulate import Constant, FilteredSquareWave, Sinusoid, integrate


def run(cfg, d, t_final, d1=None, d2=None):
    plant = PlantModel.double_integrator()
    gains = NominalGains([[0.16, 0.57]], [[0.16]])
    model = assemble_closed_loop(plant, gains, cfg)
    traj = integrate(model, FilteredSquareWave(), d, t_final=t_final)
    rep = certificate_report(traj, cfg, model.P, plant.B, d.bound(), d.rate_bound(), d1, d2)
    print(rep.summary(), end="")
    print(f"final |e| = {np.linalg.norm(traj.e[-1]):.3e}, final |u_f| = {np.linalg.norm(traj.u_f[-1]):.3e}")
    print(f"max V = {rep.V.max():.4f}\n")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-final", type=float, default=300.0)
    args = ap.parse_args()
    print("constant disturbance, no leakage")
    run(SymbioticConfig(alpha=10.0), Constant(10.0), args.t_final)
    print("sinusoidal disturbance, mu1 = 0.5, mu2 = 0.1")
    run(SymbioticConfig(alpha=10.0, mu1=0.5, mu2=0.1), Sinusoid(10.0, 2.0), args.t_final, 0.25, 0.25)


if __name__ == "__main__":
    main()
