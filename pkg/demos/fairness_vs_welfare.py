"""Stable flows can be unfair; trading a little stability buys fairness back.

Run with ``python demos/fairness_vs_welfare.py``.
"""

from fractions import Fraction

from flowcore import (
    SingleSinkInstance,
    bicriteria,
    enumerate_orders,
    fair_core_flow,
    fairness_lp,
    incorporate,
    path_instance,
    payoff,
    sw_lp,
    verify_approx_core,
)

# unit capacities; the outer pair must cross the inner pair's nodes
line = path_instance([1, 1, 1, 1], {(1, 4): 1, (2, 3): 1})
stable = {payoff(line, incorporate(line, o).flow) for o in enumerate_orders(line)}
tau, _ = fairness_lp(line)
print("stable payoffs from every order:", [tuple(map(str, p)) for p in stable])
print("best possible minimum payoff:", tau)

print("\nlambda  payoff               min   approx factor  holds")
for k in range(1, 10, 2):
    lam = Fraction(k, 10)
    res = bicriteria(line, lam)
    ok = verify_approx_core(line, res.flow, res.factor).in_core
    print(f"{str(lam):6s}  {','.join(str(x) for x in res.payoff):20s} {str(min(res.payoff)):5s} {str(res.factor):13s}  {ok}")

# with a common sink there is no conflict: one flow is fair, efficient and stable
star = SingleSinkInstance.build(
    (1, 2, 3, 4, 5),
    ((1, 5), (2, 5), (3, 4), (4, 5)),
    {1: 1, 2: 3, 3: 2, 4: 1, 5: 3},
    5,
    {1: 2, 2: 2, 3: 2},
)
flow, x, tau = fair_core_flow(star)
print("\nsingle sink throughputs:", {s: str(v) for s, v in x.items()}, "throttle", tau)
print("total", sum(x.values()), "= max welfare / 2 =", sw_lp(star.base)[0] / 2)
