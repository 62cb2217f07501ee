"""Synthetic vanilla/long chain-of-thought corpus for the bundled tiny model.

Writes:
  data/<domain>_cot.jsonl       100 CoT examples per domain (question, vanilla_cot, long_cot)
  data/math_eval.jsonl          held-out boxed-answer benchmark items
  data/science_mc_eval.jsonl    held-out multiple-choice items (physics/chemistry/biology)
  tools/tinylm/corpus.txt       training documents, separated by \\x00

Every document keeps one answering style (short or long) across all of its
question/answer blocks, so the model has to carry the style in its residual
stream from earlier blocks into later ones.
"""

import argparse
import json
import random
from pathlib import Path

INSTRUCTION = ("Answer the following question step by step and put the final "
               "answer in \\boxed{}.")
MC_SUFFIX = " Put the letter of the correct choice in the box."


# --- problem families -------------------------------------------------------
# Each returns (question, answer, vanilla_steps, long_steps)


def math_add(r):
    a, b = r.randint(10, 89), r.randint(10, 89)
    s = a + b
    q = f"What is {a} + {b}?"
    van = [f"{a} + {b} = {s}."]
    lng = [
        "Let me work through this carefully.",
        f"First, add the tens: {a // 10 * 10} + {b // 10 * 10} = {a // 10 * 10 + b // 10 * 10}.",
        f"Then add the ones: {a % 10} + {b % 10} = {a % 10 + b % 10}.",
        f"Combine them: {a // 10 * 10 + b // 10 * 10} + {a % 10 + b % 10} = {s}.",
        f"Wait, let me verify by subtracting: {s} - {b} = {a}. That matches.",
    ]
    return q, str(s), van, lng


def math_sub(r):
    a, b = r.randint(40, 99), r.randint(10, 39)
    d = a - b
    q = f"What is {a} - {b}?"
    van = [f"{a} - {b} = {d}."]
    lng = [
        "Let me work through this carefully.",
        f"First, subtract the tens: {a} - {b // 10 * 10} = {a - b // 10 * 10}.",
        f"Then subtract the ones: {a - b // 10 * 10} - {b % 10} = {d}.",
        f"Wait, let me verify by adding back: {d} + {b} = {a}. That matches.",
    ]
    return q, str(d), van, lng


def math_mul(r):
    a, b = r.randint(3, 19), r.randint(2, 9)
    p = a * b
    q = f"What is {a} times {b}?"
    van = [f"{a} x {b} = {p}."]
    lng = [
        "Let me work through this carefully.",
        f"I can split {a} into {a // 10 * 10} and {a % 10}.",
        f"{a // 10 * 10} x {b} = {a // 10 * 10 * b} and {a % 10} x {b} = {a % 10 * b}.",
        f"Adding them: {a // 10 * 10 * b} + {a % 10 * b} = {p}.",
        f"Wait, let me check another way: {b} x {a} = {p}. That matches.",
    ]
    return q, str(p), van, lng


def math_twostep(r):
    n, c, k = r.randint(2, 9), r.randint(2, 9), r.randint(1, 20)
    t = n * c + k
    q = f"Sam buys {n} boxes with {c} pens each and finds {k} more pens. How many pens does Sam have?"
    van = [f"{n} x {c} = {n * c}, and {n * c} + {k} = {t}."]
    lng = [
        "Let me plan this first: count the pens in the boxes, then add the extra ones.",
        f"The boxes hold {n} x {c} = {n * c} pens.",
        f"Adding the extra pens: {n * c} + {k} = {t}.",
        f"Wait, let me re-check the multiplication: {n} groups of {c} is {n * c}. Yes.",
        f"So the total is {t}.",
    ]
    return q, str(t), van, lng


def phys_speed(r):
    v, h = r.randint(2, 30) * 5, r.randint(2, 6)
    d = v * h
    q = f"A car travels {d} km in {h} hours. What is its average speed in km/h?"
    van = [f"Speed = distance / time = {d} / {h} = {v}."]
    lng = [
        "Let me recall the relation first: average speed is distance divided by time.",
        f"The distance is {d} km and the time is {h} hours.",
        f"So the speed is {d} / {h} = {v} km/h.",
        f"Wait, let me verify: {v} x {h} = {d}. That matches the distance.",
    ]
    return q, str(v), van, lng


def phys_force(r):
    m, a = r.randint(2, 20), r.randint(2, 9)
    f = m * a
    q = f"What net force in newtons accelerates a {m} kg mass at {a} m/s^2?"
    van = [f"F = m a = {m} x {a} = {f}."]
    lng = [
        "Let me recall Newton's second law: force equals mass times acceleration.",
        f"The mass is {m} kg and the acceleration is {a} m/s^2.",
        f"So F = {m} x {a} = {f} N.",
        f"Wait, let me check the units: kg times m/s^2 is newtons. And {f} / {m} = {a}. Good.",
    ]
    return q, str(f), van, lng


def chem_moles(r):
    molar = r.choice([(18, "water"), (44, "carbon dioxide"), (32, "oxygen gas"), (16, "methane"),
                      (28, "nitrogen gas"), (17, "ammonia")])
    n = r.randint(2, 15)
    mass = molar[0] * n
    q = f"How many moles are in {mass} g of {molar[1]} ({molar[0]} g/mol)?"
    van = [f"moles = {mass} / {molar[0]} = {n}."]
    lng = [
        "Let me think about what is needed: moles equal mass divided by molar mass.",
        f"The mass is {mass} g and the molar mass of {molar[1]} is {molar[0]} g/mol.",
        f"So moles = {mass} / {molar[0]} = {n}.",
        f"Wait, let me verify: {n} x {molar[0]} = {mass}. That matches.",
    ]
    return q, str(n), van, lng


def chem_atoms(r):
    mol = r.choice([("H2O", 3), ("CO2", 3), ("CH4", 5), ("NH3", 4), ("C2H6", 8), ("O3", 3), ("N2", 2),
                    ("H2O2", 4)])
    n = r.randint(2, 20)
    t = mol[1] * n
    q = f"How many atoms are in {n} molecules of {mol[0]}?"
    van = [f"Each {mol[0]} has {mol[1]} atoms, so {n} x {mol[1]} = {t}."]
    lng = [
        f"Let me first count the atoms in one molecule of {mol[0]}.",
        f"One {mol[0]} molecule has {mol[1]} atoms.",
        f"For {n} molecules: {n} x {mol[1]} = {t}.",
        f"Wait, let me recount one molecule to be sure. Yes, {mol[1]} atoms. So {t} is right.",
    ]
    return q, str(t), van, lng


def bio_division(r):
    step = r.choice([10, 15, 20, 25, 30, 40, 45, 60])
    k = r.randint(1, 6)
    total = 2 ** k
    q = f"A cell divides every {step} minutes. Starting from one cell, how many cells are there after {step * k} minutes?"
    van = [f"{step * k} / {step} = {k} divisions, 2^{k} = {total}."]
    lng = [
        "Let me plan: count the divisions, then double the cells each time.",
        f"There are {step * k} / {step} = {k} divisions.",
        f"Each division doubles the count, so 2^{k} = {total}.",
        f"Wait, let me list it: " + ", ".join(str(2 ** i) for i in range(k + 1)) + ". Yes, " + str(total) + ".",
    ]
    return q, str(total), van, lng


def bio_chromosomes(r):
    n = 2 * r.randint(2, 30)
    org = r.choice(["plant", "fish", "insect", "fungus", "frog", "mammal"])
    q = f"A diploid {org} cell has {n} chromosomes. How many chromosomes does each gamete have after meiosis?"
    van = [f"Gametes are haploid: {n} / 2 = {n // 2}."]
    lng = [
        "Let me recall what meiosis does: it halves the chromosome number.",
        f"The diploid cell has {n} chromosomes.",
        f"So each gamete gets {n} / 2 = {n // 2} chromosomes.",
        f"Wait, let me check: two gametes together restore {n // 2} + {n // 2} = {n}. Good.",
    ]
    return q, str(n // 2), van, lng


FAMILIES = {
    "math": [math_add, math_sub, math_mul, math_twostep],
    "physics": [phys_speed, phys_force],
    "chemistry": [chem_moles, chem_atoms],
    "biology": [bio_division, bio_chromosomes],
}


def render_cot(steps, answer, boxed):
    return "\n".join(steps) + f"\nSo the answer is \\boxed{{{boxed}}}."


def make_mc(r, q, answer):
    # three distractors near the answer
    val = int(answer)
    pool = sorted({val + d for d in (-4, -3, -2, -1, 1, 2, 3, 4, 5, 6) if val + d > 0} - {val})
    choices = r.sample(pool, 3) + [val]
    r.shuffle(choices)
    letter = "ABCD"[choices.index(val)]
    return [str(c) for c in choices], letter


def render_mc_prompt(q, choices, with_instruction=True):
    opts = "\n".join(f"{'ABCD'[i]}) {c}" for i, c in enumerate(choices))
    if not with_instruction:
        return f"{q}\n{opts}"
    return f"{q}\n{opts}\n{INSTRUCTION}{MC_SUFFIX}"


def block(r, domain, long_style, mc, with_instruction):
    fam = r.choice(FAMILIES[domain])
    q, ans, van, lng = fam(r)
    steps = lng if long_style else van
    if mc:
        choices, letter = make_mc(r, q, ans)
        steps = steps + [f"The value {ans} is option {letter}."]
        return render_mc_prompt(q, choices, with_instruction) + "\n" + render_cot(steps, ans, letter)
    head = f"{q}\n{INSTRUCTION}" if with_instruction else q
    return head + "\n" + render_cot(steps, ans, ans)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--root", default=str(Path(__file__).resolve().parents[2]))
    ap.add_argument("--docs", type=int, default=24000)
    ap.add_argument("--long-fraction", type=float, default=0.4)
    ap.add_argument("--seed", type=int, default=20250601)
    args = ap.parse_args()
    root = Path(args.root)
    r = random.Random(args.seed)

    # Held-out sets first, so their questions can be excluded from training.
    # Benchmark items also avoid every CoT example question, so memory
    # retrieval never returns an item's own worked answer.
    held = set()
    example_questions = set()
    data = root / "data"
    data.mkdir(exist_ok=True)
    for domain in FAMILIES:
        with open(data / f"{domain}_cot.jsonl", "w") as f:
            seen = set()
            i = 0
            while i < 100:
                fam = r.choice(FAMILIES[domain])
                q, ans, van, lng = fam(r)
                if q in seen:
                    continue
                seen.add(q)
                example_questions.add(q)
                rec = {
                    "example_id": f"{domain}-{i:03d}",
                    "domain": domain,
                    "question": q,
                    "vanilla_cot": render_cot(van, ans, ans),
                    "long_cot": render_cot(lng, ans, ans),
                }
                f.write(json.dumps(rec) + "\n")
                i += 1

    with open(data / "math_eval.jsonl", "w") as f:
        i = 0
        while i < 40:
            q, ans, _, _ = r.choice(FAMILIES["math"])(r)
            if q in held or q in example_questions:
                continue
            held.add(q)
            f.write(json.dumps({"item_id": f"math-eval-{i:03d}", "domain": "math", "prompt": q,
                                "answer_type": "boxed", "gold": ans}) + "\n")
            i += 1

    with open(data / "science_mc_eval.jsonl", "w") as f:
        i = 0
        while i < 30:
            domain = ["physics", "chemistry", "biology"][i % 3]
            q, ans, _, _ = r.choice(FAMILIES[domain])(r)
            if q in held or q in example_questions:
                continue
            held.add(q)
            choices, letter = make_mc(r, q, ans)
            f.write(json.dumps({"item_id": f"{domain}-eval-{i:03d}", "domain": domain, "prompt": q,
                                "answer_type": "multiple_choice", "gold": letter,
                                "choices": choices}) + "\n")
            i += 1

    docs = []
    domains = list(FAMILIES)
    weights = [0.55, 0.15, 0.15, 0.15]
    while len(docs) < args.docs:
        long_style = r.random() < args.long_fraction
        nblocks = r.choice([1, 1, 2, 2, 3])
        parts = []
        # Only the final block may carry the instruction; an instructed
        # question is always the last thing answered before end-of-text.
        for b in range(nblocks):
            domain = r.choices(domains, weights)[0]
            mc = domain != "math" and r.random() < 0.4
            parts.append(block(r, domain, long_style, mc, with_instruction=b == nblocks - 1 and r.random() < 0.8))
        text = "\n\n".join(parts)
        if any(h in text for h in held):
            continue
        docs.append(text)
    (root / "tools" / "tinylm" / "corpus.txt").write_text("\x00".join(docs))
    print(f"{len(docs)} docs, {sum(map(len, docs))} bytes")


if __name__ == "__main__":
    main()
