"""Price a target radius in samples before spending them.

For a point estimated at p_A = 0.93 under sigma = 0.25, walks a ladder
of target radii and reports the minimal sample count for each, including
the verdict when no budget can ever reach the target.
"""

from smoothcert import ConfidenceSpec, plan_samples

SIGMA = 0.25
P_A = 0.93
CONF = ConfidenceSpec(0.001)

print(f"p_A estimate {P_A}, sigma {SIGMA}, alpha {CONF.alpha}")
print(f"{'target':>8}  {'verdict':>12}  {'required n':>10}")
for target in (0.15, 0.25, 0.3, 0.33, 0.35, 0.4):
    plan = plan_samples(P_A, SIGMA, CONF, target)
    if plan.required_n is None:
        print(f"{target:>8.2f}  {'unreachable':>12}  {'-':>10}")
    else:
        print(f"{target:>8.2f}  {'feasible':>12}  {plan.required_n:>10}")

print()
print("The limit radius sits at sigma * quantile(0.93) = 0.369, so 0.35")
print("is still purchasable while 0.4 is out of reach at any budget.")

# early stopping: 500 samples already spent toward the 0.3 target
plan = plan_samples(P_A, SIGMA, CONF, 0.3, current_n=500)
assert plan.required_n is not None
extra = max(0, plan.required_n - plan.current_n)
print(f"with 500 samples banked, {extra} more reach radius 0.3.")
