"""Smoke test for the compiled `mortrisk` extension.

Build and install first:

    pip install --no-build-isolation -e crates/py
    python python/smoke_test.py
"""

import json
import math
import os
import tempfile

import mortrisk


def main():
    assert sorted(mortrisk.FAMILIES) == ["dt", "knn", "lr", "mlp", "rf"]

    # Reference values
    assert abs(mortrisk.compute_egfr(2.4, 73.7, "F") - 19.28) <= 0.05
    assert abs(mortrisk.compute_egfr(0.8, 52.2, "M") - 102.6) <= 0.1
    assert mortrisk.auc([0.1, 0.4, 0.4, 0.9], [0, 0, 1, 1]) == 0.875

    cont, cats, labels = mortrisk.smote_nc(
        [[float(i), float(i % 5)] for i in range(40)],
        [1 if i < 8 else 0 for i in range(40)],
        categorical=[[i % 3] for i in range(40)],
        seed=4,
    )
    assert labels.count(1) == labels.count(0) == 32
    assert len(cont) == len(cats) == 64

    raw = mortrisk.Cohort.generate(n=900, prevalence=0.15, seed=2)
    cohort, report = raw.clean()
    assert len(cohort) == report["retained"] < len(raw)
    assert len(cohort.feature_names) == 25

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "cohort.csv")
        cohort.save(path)
        assert len(mortrisk.Cohort.load(path)) == len(cohort)

        patient = cohort.record(0)
        for family, hyper in [
            ("lr", {"lambda": 10.0}),
            ("dt", {"max_depth": 4.0}),
            ("rf", {"n_trees": 15.0}),
            ("knn", {"k": 16.0}),
            ("mlp", {"epochs": 8.0}),
        ]:
            model = mortrisk.Model.train(cohort, family, hyperparameters=hyper, seed=1)
            p = model.predict(patient)
            assert 0.0 <= p <= 1.0
            e = model.explain(patient)
            assert e["prediction"] == p
            phi = sum(a["phi"] for a in e["force"]["arrows"])
            assert math.isclose(e["force"]["base"] + phi, p, abs_tol=1e-9), family
            assert len(e["force"]["arrows"]) == 25

            artifact = os.path.join(tmp, f"{family}.json")
            model.save(artifact)
            again = mortrisk.Model.load(artifact)
            assert again.predict(patient) == p
            assert json.loads(again.to_json())["family"] == family
            print(f"{family:>3}: p={p:.4f} mode={e['force']['mode']}")

    try:
        model.predict({"age": 70})
    except ValueError as err:
        assert "required" in str(err)
    else:
        raise AssertionError("incomplete record accepted")

    result = mortrisk.evaluate(cohort, families=["lr", "dt"], trials=2, seed=3)
    assert set(result["summary"]) == {"lr", "dt"}
    assert result["csv"].startswith("family,metric,mean,std")
    print(result["text"].rstrip())
    print("smoke test passed")


if __name__ == "__main__":
    main()
