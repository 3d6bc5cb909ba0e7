"""Finite-difference check of every hand-written backward pass in the numpy
network stack, including the cooperative actor loss."""

from mecoffload.nn.gradcheck import STEP, THRESHOLD, run_suite

errors = run_suite(seed=0)
print(f"central differences, h={STEP}, threshold {THRESHOLD}")
for name, err in errors.items():
    print(f"  {name:<11} {err:.2e}  {'ok' if err < THRESHOLD else 'FAIL'}")
