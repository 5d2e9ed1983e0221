"""Classify the singular point of every bundled fixture and print its branches.

    python3 demos/taxonomy_tour.py
"""
from singulode import classify, fixture_path, load_model_path
from singulode.cli import branch_table

POINTS = [
    ("scalar_turning.model", [0.0], 1.0),
    ("scalar_turning.model", [0.0], 0.0),
    ("scalar_neg.model", [0.0], 0.0),
    ("turning2d.model", [0.0, 0.0], 0.0),
    ("reflect.model", [0.0, 0.0], 0.0),
    ("complicated.model", [0.0, 0.0], 0.0),
    ("triple.model", [0.0, 0.0], 0.0),
    ("linking.model", [0.0, 0.0], 0.0),
]


def main():
    for name, x0, t0 in POINTS:
        model = load_model_path(fixture_path(name))
        cls = classify(model, x0, t0)
        case = f" case ({cls.case})" if cls.case else ""
        print(f"{name} at x0={x0}, t0={t0}: {cls.kind}{case}")
        if cls.branches:
            print(branch_table(cls))
        print()


if __name__ == "__main__":
    main()
