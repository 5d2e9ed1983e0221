"""Continue the reflecting example through its singular point.

The system y x' = -1, (y - x) x' + y' = 0 has the closed-form orbit
t = exp(-x) - 1 + x - x^2/2, y = t + x^2/2 through the origin.  The
desingularised integration should follow it, and the orbit near s = 0
should show the 1/3 and 2/3 power laws of the reflecting branch.

    python3 demos/reflecting_orbit.py
"""
import numpy as np

from singulode import classify, fixture_path, integrate, load_model_path, match_branch


def main():
    model = load_model_path(fixture_path("reflect.model"))
    cls = classify(model, [0.0, 0.0], 0.0)
    (br,) = cls.branches
    print(f"{cls.kind}: {br.describe()}")

    traj = integrate(model, [0.0, 0.0], 0.0, (-1.0, 1.0))
    x, y, t = traj.x[:, 0], traj.x[:, 1], traj.t
    inside = np.abs(x) <= 0.5
    err_t = np.abs(t - (np.exp(-x) - 1 + x - x**2 / 2))[inside].max()
    err_y = np.abs(y - t - x**2 / 2)[inside].max()
    print(f"{len(traj)} samples, events: {[e.kind for e in traj.events]}")
    print(f"max deviation from the exact orbit on |x| <= 0.5: t {err_t:.2e}, y {err_y:.2e}")
    # t never changes sign along the orbit: it touches det A = 0 and goes back
    print(f"t range along the orbit: [{t.min():.4f}, {t.max():.4f}]")

    bm = match_branch(traj, cls)
    for direction in (-1, 1):
        for name in ("y~", "y"):
            f = bm.fit(name, direction)
            print(f"s{'+' if direction > 0 else '-'} {name:3s} ~ {f.coefficient:+.4f} |t|^{f.exponent:.4f}")


if __name__ == "__main__":
    main()
