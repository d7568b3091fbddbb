"""Check every layer's analytic gradient against finite differences.

The training code trusts nn.grad for everything, so this is the first thing
worth convincing yourself of: build a pile of small random models covering
dense, conv, pooling, flatten and relu layers, nudge every parameter by +-h,
and compare the measured slope with the backward pass.
"""
import numpy as np

from splitfedsim import nn
from splitfedsim.gradcheck import make_instance, relative_errors, run_gradient_checks


def main():
    print("finite-difference gradient check, h = 1e-4")
    print()

    # The packaged runner draws 12 instances over 6 model families.
    results = run_gradient_checks(count=12, seed=0)
    width = max(len(r.description) for r in results)
    for r in results:
        status = "ok" if r.passed else "MISMATCH"
        print(f"  {r.description:<{width}}  max rel err {r.max_rel_err:.3e}  {status}")
    worst = max(r.max_rel_err for r in results)
    print()
    print(f"worst over {len(results)} instances: {worst:.3e}  (tolerance 1e-4)")

    # Same machinery, by hand, on one instance - the long way round, to show
    # what the runner actually does.
    desc, spec, params, batch, labels = make_instance(2, seed=0)
    analytic, loss = nn.grad(spec, params, batch, labels)
    numeric = nn.finite_diff_grad(spec, params, batch, labels, 1e-4)
    err = relative_errors(analytic, numeric)
    print()
    print(f"by hand on '{desc}': loss {loss:.4f}, "
          f"{params.size} parameters, max rel err {err.max():.3e}")
    print(f"largest analytic component {np.abs(analytic).max():.4f}, "
          f"largest numeric {np.abs(numeric).max():.4f}")


if __name__ == "__main__":
    main()
