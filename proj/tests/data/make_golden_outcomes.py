"""Writes golden_outcomes.json: 20 prescribed pre/post cases with CIS, Inf and
class worked out cell by cell, the way a spreadsheet would (one column per
attribute rating, one per rho, then the signed sum)."""

import json
import random

ATTRS = ["commute", "vacation", "office", "salary"]
SCALE = [-5, -3, -1, 1, 3, 5]
SIGN_A = {"commute": 1, "vacation": 1, "office": -1, "salary": -1}


def snapshot(plus, minus, weight):
    return {"responses": {a: {"plus": plus[i], "minus": minus[i]} for i, a in enumerate(ATTRS)},
            "weights": {a: weight[i] for i, a in enumerate(ATTRS)}}


def sheet_psi(snap, offer):
    # rho cells
    rho_commute = (snap["responses"]["commute"]["plus"] - snap["responses"]["commute"]["minus"]) * snap["weights"]["commute"]
    rho_vacation = (snap["responses"]["vacation"]["plus"] - snap["responses"]["vacation"]["minus"]) * snap["weights"]["vacation"]
    rho_office = (snap["responses"]["office"]["plus"] - snap["responses"]["office"]["minus"]) * snap["weights"]["office"]
    rho_salary = (snap["responses"]["salary"]["plus"] - snap["responses"]["salary"]["minus"]) * snap["weights"]["salary"]
    psi_a = rho_commute + rho_vacation - rho_office - rho_salary
    return psi_a if offer == "A" else -psi_a


def case(name, pre, post, choice, loc_plus):
    psi_pre = sheet_psi(pre, choice)
    psi_post = sheet_psi(post, choice)
    cis = psi_post - psi_pre
    inf = choice == loc_plus
    direction = "Up" if cis >= 0 else "Down"
    style = direction + "Cis" + ("Up" if inf else "Down") + "Inf"
    return {"name": name, "pre": pre, "post": post, "choice": choice, "loc_plus": loc_plus,
            "expected": {"psi_pre": psi_pre, "psi_post": psi_post, "cis": cis, "inf": inf, "style": style}}


cases = []
flat = snapshot([1, 1, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1])
cases.append(case("identical neutral snapshots", flat, flat, "A", "A"))
mid = snapshot([3, 1, -1, 3], [1, -1, 1, 1], [4, 2, 6, 1])
cases.append(case("identical mixed snapshots, choice B", mid, mid, "B", "A"))
# psi_A moves 10 -> 50 with A chosen
cases.append(case("A chosen, psi_A 10 to 50",
                  snapshot([3, 1, 1, 1], [1, 1, 1, 1], [5, 1, 1, 1]),
                  snapshot([5, 1, 1, 1], [-5, 1, 1, 1], [5, 1, 1, 1]), "A", "B"))
# psi_B moves -20 -> -60 with B chosen
cases.append(case("B chosen, psi_B -20 to -60",
                  snapshot([3, 3, 1, 1], [1, 1, 1, 1], [5, 5, 1, 1]),
                  snapshot([5, 5, 1, 1], [1, -3, 1, 1], [5, 5, 1, 1]), "B", "B"))
# compensating changes: commute up 16, vacation down 16 -> cis 0 with inf false
cases.append(case("compensating shift ties at zero",
                  snapshot([1, 3, 1, 1], [1, 1, 1, 1], [8, 8, 1, 1]),
                  snapshot([3, 1, 1, 1], [1, 1, 1, 1], [8, 8, 1, 1]), "A", "B"))
cases.append(case("extreme swing toward A",
                  snapshot([-5, -5, 5, 5], [5, 5, -5, -5], [8, 8, 8, 8]),
                  snapshot([5, 5, -5, -5], [-5, -5, 5, 5], [8, 8, 8, 8]), "A", "A"))
cases.append(case("extreme swing away from chosen B",
                  snapshot([-5, -5, 5, 5], [5, 5, -5, -5], [8, 8, 8, 8]),
                  snapshot([5, 5, -5, -5], [-5, -5, 5, 5], [8, 8, 8, 8]), "B", "A"))
cases.append(case("weight change only",
                  snapshot([5, 1, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1]),
                  snapshot([5, 1, 1, 1], [1, 1, 1, 1], [7, 1, 1, 1]), "B", "B"))

rng = random.Random(20240611)
while len(cases) < 20:
    def rnd():
        return snapshot([rng.choice(SCALE) for _ in ATTRS], [rng.choice(SCALE) for _ in ATTRS],
                        [rng.randint(1, 8) for _ in ATTRS])
    cases.append(case("random case %d" % len(cases), rnd(), rnd(), rng.choice("AB"), rng.choice("AB")))

with open("golden_outcomes.json", "w") as f:
    json.dump(cases, f, indent=1)
    f.write("\n")
print(sum(1 for c in cases if c["expected"]["cis"] == 0), "tie cases;",
      sorted({c["expected"]["style"] for c in cases}))
