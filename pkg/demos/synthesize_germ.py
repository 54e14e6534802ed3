"""Synthesize a germ from a small horn map and inspect what comes out.

Run with ``python demos/synthesize_germ.py``.
"""

import math
import warnings

import numpy as np

from parabsynth import Germ, ModulusData, measure_horn_maps, synthesis_bounds, synthesize
from parabsynth.globalize import find_poles, multiplier_at
from parabsynth.synthesis import fixed_point_residual, taylor_delta


def large_data_run():
    # at admissible twists the correction is below double precision, so push past the bound
    big = 3e6
    data = ModulusData(0.0, Germ([0, big]), Germ([0, -big], center="inf"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = synthesize(data, 0.7, allow_above_bound=True)
    d = result.diagnostics
    print(f"large data: {d['iterations']} iterations, sup|f| = {d['sampled_f_norm']:.3e}, "
          f"worst contraction ratio {d['max_ratio']:.3f}")
    print(f"horn map reproduced to {measure_horn_maps(result).max_psi_error:.2e}")


def main():
    large_data_run()
    print()
    data = ModulusData(0.3, Germ([0, 1 / 20]))
    bounds = synthesis_bounds(data)
    lam = min(bounds.lambda_max / 2, 1 / 25600)
    print(f"largest admissible twist {bounds.lambda_max:.3e}, using {lam:.3e}")

    result = synthesize(data, lam)
    d = result.diagnostics
    print(f"fixed point after {d['iterations']} iterations, residual {fixed_point_residual(result):.2e}")

    horn = measure_horn_maps(result)
    print(f"horn map reproduced to {horn.max_psi_error:.2e}")

    jet = taylor_delta(result).coeffs[:4]
    print("time-one map jet:", np.round(jet.real, 12))

    for rep in find_poles(result):
        print(f"pole near {rep.label:>3}: {rep.location:.6f}  (moved {rep.distance:.1e}, "
              f"allowed {rep.allowed:.1e})")

    for point in (1, -1):
        m = multiplier_at(result, point).multiplier
        print(f"multiplier at {point:+d}: {m:.6e}  vs exp(-1/mu) = {math.exp(-1 / 0.3):.6e}")


if __name__ == "__main__":
    main()
