"""A Lagrangian whose velocity Hessian degenerates.

L = qdot^3/3 + pdot^2/2 - k q p + t q has det d2L/dqdot2 = 2 qdot, so the
Euler-Lagrange system is singular wherever qdot = 0.  At a point with
t - k p != 0 the singularity is a turning: qdot ~ +-sqrt(|t - t0|) on one
side only, and the continued orbit meets the singular surface and
turns back in t.

    python3 demos/lagrangian_turning.py
"""
from singulode import classify, dump_model, fixture_path, integrate, load_model_path


def main():
    model = load_model_path(fixture_path("two_coord.lagr"))
    print(dump_model(model))
    x0, t0 = [1.0, 0.0, 0.0, 0.5], 1.0
    cls = classify(model, x0, t0)
    print(f"at x0={x0}, t0={t0}: {cls.kind}")
    for br in cls.branches:
        print("  " + br.describe())

    traj = integrate(model, x0, t0, (-0.5, 0.5))
    print(f"events: {[(e.kind, float(e.s)) for e in traj.events]}")
    print(f"t at both ends: {traj.t[0]:.4f}, {traj.t[-1]:.4f}; smallest t on the orbit: {traj.t.min():.6f}")
    print(f"qdot changes sign: {traj.x[0, 2]:+.4f} -> {traj.x[-1, 2]:+.4f}")


if __name__ == "__main__":
    main()
