"""Four players on a line: compute a stable flow, test payoffs, read certificates.

Run with ``python demos/four_players.py``.
"""

from fractions import Fraction

from flowcore import (
    IncorporationOrder,
    certify_coalition,
    incorporate,
    path_instance,
    payoff,
    verify_core,
)

# the two end players have unlimited capacity, the middle two can carry 2 units each
game = path_instance(["inf", 2, 2, "inf"], {(1, 3): 2, (2, 4): 2, (1, 2): 1, (2, 3): 2, (3, 4): 1})

flow, trace = incorporate(game, IncorporationOrder(1, (2, 3, 4)))
print("incorporating players 1, 2, 3, 4 in order")
for event in trace.events:
    print(f"  step {event.step}: commodity {event.commodity} gets {event.amount}")
print("payoff:", [str(x) for x in payoff(game, flow)])
print("stable:", verify_core(game, flow).in_core)

for candidate in [(2, 1, 2, 1), (1, 2, 1, 2), (Fraction(3, 2),) * 4]:
    verdict = verify_core(game, candidate)
    label = ",".join(str(x) for x in candidate)
    if verdict.in_core:
        print(f"({label}) is stable")
    else:
        b = verdict.breakaway
        print(f"({label}) breaks: coalition {b.S} can give each member {b.margin} more")

# every interval coalition gets a proof that it cannot do better
print("\nwhy nobody leaves the incorporated flow:")
for S in [(1, 2), (2, 3), (1, 2, 3), (2, 3, 4)]:
    res = certify_coalition(game, flow, S)
    cert = res.certificate
    print(f"  {S}: {res.method:16s} Y={sorted(cert.Y)} W={sorted(cert.W)}")
