"""Regenerates loss_oracle.json with 50-digit arithmetic.

    python3 gen_loss_oracle.py > loss_oracle.json
"""
import json
import random

import mpmath as mp

mp.mp.dps = 50
FLOOR = mp.mpf("1e-12")


def softmax(z):
    z = [mp.mpf(x) for x in z]
    m = max(z)
    e = [mp.exp(x - m) for x in z]
    s = sum(e)
    return [x / s for x in e]


def ce(p, y):
    return -mp.log(max(p[y], FLOOR))


def kl(s, t):
    return sum(ti * (mp.log(max(ti, FLOOR)) - mp.log(max(si, FLOOR))) for si, ti in zip(s, t) if ti > 0)


rng = random.Random(20240613)
ce_cases = []
for _ in range(100):
    c = rng.randint(2, 6)
    z = [round(rng.uniform(-8, 8), 6) for _ in range(c)]
    y = rng.randrange(c)
    ce_cases.append({"logits": z, "label": y, "ce": mp.nstr(ce(softmax(z), y), 30)})

kl_cases = []
for _ in range(100):
    c = rng.randint(2, 6)
    a = [round(rng.uniform(-8, 8), 6) for _ in range(c)]
    b = [round(rng.uniform(-8, 8), 6) for _ in range(c)]
    kl_cases.append({"student_logits": a, "teacher_logits": b, "kl": mp.nstr(kl(softmax(a), softmax(b)), 30)})

fixed = kl([mp.mpf("0.9"), mp.mpf("0.1")], [mp.mpf("0.5"), mp.mpf("0.5")])
print(json.dumps({"ce": ce_cases, "kl": kl_cases, "kl_half_vs_nine_tenths": mp.nstr(fixed, 30)}, indent=1))
