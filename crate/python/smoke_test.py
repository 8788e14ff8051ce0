"""Smoke test for the noiseless Python extension.

Build and install first, e.g. ``cd crates/python && maturin develop --release``
or ``maturin build --release`` followed by ``pip install`` of the wheel.
"""

import math

import noiseless


def main() -> None:
    ds = noiseless.Dataset("0,1;0,1", "mean")
    report = ds.audit(noiseless.Mechanism.identity())
    assert report.epsilon_star == 1.0, report
    assert report.counts == [2, 2]
    assert "epsilon_star = 1.0" in str(report)

    coarse = noiseless.Mechanism("quantizer:2:0..1")
    assert ds.audit(coarse).epsilon_star == 1.0
    assert coarse.apply(ds, ["0", "1"]) == 0.75

    unit = noiseless.Dataset("0..1;0..1;0..1;0..1", "mean")
    sens, lower_bound = unit.sensitivity()
    assert sens == 0.25 and not lower_bound
    q = unit.synthesize(2.0)
    assert q.levels == 12
    assert unit.audit(q.mechanism()).satisfies(2.0)
    assert noiseless.synthesize_levels(2.0, 0, 1, "1/4", rule="stated") == 16
    assert q.cell_index("1/2") == 6

    both = noiseless.Mechanism.compose([coarse, noiseless.Mechanism("quantizer:4:0..1")])
    assert str(both) == "compose(quantizer:2:0..1,quantizer:4:0..1)"
    assert ds.audit(both).epsilon_star <= 2.0 + 1e-9

    m = noiseless.measures("1:a,2:a,3:b")
    assert m["maximin"] == 1.0 and len(m["partition"]) == 2
    leak = noiseless.maximal_leakage({"1": "a", "2": "a", "3": "b"}, "uniform")
    assert math.isclose(leak, 1.0)

    size, rate, code = noiseless.zero_error_code("0=a|b;1=b|c;2=c|d;3=d|e;4=e|a", 2)
    assert size == 5 and math.isclose(rate, math.log2(5) / 2) and len(code) == 5

    panel = noiseless.synthesize_panel(50, 24, 1)
    assert len(panel) == 50 and all(v >= 0 for row in panel for v in row)
    r = noiseless.play_game(panel, "correlation", 1, 200, 7, mechanism="identity")
    assert r["adv"] >= 0.8, r
    again = noiseless.play_game(panel, "mse", 4, 200, 7, epsilon=2.0)
    assert again == noiseless.play_game(panel, "mse", 4, 200, 7, epsilon=2.0)

    try:
        noiseless.Dataset("0..1", "table:0->1")
    except ValueError:
        pass
    else:
        raise AssertionError("bad query accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
