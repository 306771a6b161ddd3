"""Smoke test for the metricfit extension module.

Run after `pip install --no-build-isolation -e crates/python`:

    python python/smoke_test.py
"""

import metricfit


def main():
    # planted 1-D instance: the solver should fit it far below the mean square
    inst, planted = metricfit.gen_planted(5, k=1, rng_seed=3)
    assert inst.n == 5 and inst.k == 1
    assert inst.objective(planted) <= 1e-9

    values = sorted({p[0] for p in planted})
    res = metricfit.solve_emv(inst, eps=0.25, anchors="all", grid=values, rng_seed=1)
    print(res)
    assert len(res.points) == 5
    assert res.objective <= 0.25 * inst.mean_sq
    assert res.lp_value <= res.objective + 1e-7
    assert res.provenance["algorithm"] == "emv"

    exact = metricfit.brute_force_emv(inst, values)
    assert exact.objective <= 1e-9

    ls = metricfit.local_search_emv(inst, restarts=3, rng_seed=0)
    assert ls.objective <= inst.mean_sq + 1e-12

    # unit weights on the same distances
    d = inst.matrix()
    w = [[0.0 if i == j else 1.0 for j in range(5)] for i in range(5)]
    wres = metricfit.solve_wemv(d, w, grid="values:-3,-2,-1,0,1,2,3", rng_seed=2)
    assert wres.provenance["algorithm"] == "wemv"

    delta, rho = metricfit.graph_diag(w, 2)
    assert rho >= 1 - 1 / (2 * delta) - 1e-9

    # exact rank-one matrix under the l4 norm
    u, v = [1.0, -1.0, 2.0], [1.0, 2.0, -1.0]
    lra = metricfit.LraInstance([[a * b for b in v] for a in u], p=4)
    r = metricfit.solve_lra(lra, grid=[-2.0, -1.0, 0.0, 1.0, 2.0], norm_loop="diagonal:9")
    print(r)
    assert r.objective <= 1e-9 * lra.norm_p

    grid = metricfit.build_emv_grid(0.5, 1, inst.delta, inst.mean_sq)
    assert 0.0 in grid

    try:
        metricfit.solve_emv(inst, eps=2.0)
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("eps=2 should be rejected")

    print("smoke test ok, metricfit", metricfit.__version__)


if __name__ == "__main__":
    main()
