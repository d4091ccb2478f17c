#!/usr/bin/env python3
"""Regenerates the synthetic fixtures in this directory.

Deterministic: running it twice produces identical files. The hand-written
fixtures (regulation trees, transcribed question/response texts) are not
touched.
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

T10_EVENT = (
    "A real estate company collected personal data from individuals for its operations. "
    "However, the company did not establish a joint controllership agreement with other entities "
    "involved in processing the data. Additionally, the company collected personal data without a "
    "legal basis and failed to comply with a request from an individual to delete their personal "
    "data in a timely manner."
)


def desk_case(id, domain, gold, narrative, cited=(), **annotation):
    case = {"id": id, "domain": domain, "narrative": narrative, "annotation": annotation, "gold": gold}
    if cited:
        case["cited_paths"] = [list(p) for p in cited]
    return case


DESK = [
    desk_case(
        "gdpr-realestate", "GDPR", "PROHIBITED", T10_EVENT,
        cited=[("GDPR", "Chapter II", "Article 6"), ("GDPR", "Chapter III", "Article 17"),
               ("GDPR", "Chapter IV", "Article 26")],
        sender="Real Estate Company", recipient="Other Entities", subject="Individuals",
        information_type="Personal Data", purpose="Operations",
    ),
    desk_case(
        "gdpr-passwords", "GDPR", "PROHIBITED",
        "Meta Platforms Ireland Limited (MPIL) stored user passwords on their internal systems without "
        "encryption. Although external parties did not have access to these passwords, the lack of "
        "encryption increased the risk of misuse. Additionally, MPIL did not report or document a data "
        "breach related to the storage of these unencrypted passwords.",
        sender="Meta Platforms Ireland Limited", recipient="Internal systems", subject="Users",
        information_type="Passwords",
    ),
    desk_case(
        "gdpr-agent", "GDPR", "PERMITTED",
        "A real estate agent forwarded a buyer's phone number to a mortgage broker after the buyer "
        "asked to receive financing offers.",
        sender="Real estate agent", recipient="Mortgage broker", subject="Buyer",
        information_type="Phone number", purpose="Financing offers", attributes=["consent"],
    ),
    desk_case(
        "gdpr-contractor", "GDPR", "PROHIBITED",
        "A concrete contractor filmed neighbouring gardens with site cameras and kept the footage "
        "without informing the residents.",
        sender="concrete contractor", recipient="Site office", subject="Residents",
        information_type="Video footage",
    ),
    desk_case(
        "gdpr-coownership", "GDPR", "PROHIBITED",
        "The manager of a real estate co-ownership posted the names of owners in arrears on the "
        "notice board of the building.",
        sender="Manager of a real estate co-ownership", recipient="Building visitors",
        subject="Owners in arrears", information_type="Payment status",
    ),
    desk_case(
        "hipaa-plainfield", "HIPAA", "PROHIBITED",
        "A city received a public-records request for the claims experience of its employee health "
        "plan, including the names of covered dependents, and had to decide how much to disclose.",
        sender="City of Plainfield", recipient="Records requester", subject="City employees",
        information_type="Health insurance claims",
    ),
    desk_case(
        "hipaa-referral", "HIPAA", "PERMITTED",
        "A clinic sent a patient's lab results to the referring physician to continue treatment.",
        sender="Clinic", recipient="Referring physician", subject="Patient",
        information_type="Lab results", purpose="Treatment",
    ),
    desk_case(
        "hipaa-gym", "HIPAA", "NOT_APPLICABLE",
        "A gym shared member attendance counts with a marketing firm.",
        sender="Gym", recipient="Marketing firm", subject="Members", information_type="Attendance",
    ),
    desk_case(
        "aiact-predictive", "AI_ACT", "PROHIBITED",
        "An open-source predictive policing system analyses real-time remote biometric data and uses "
        "subliminal manipulation techniques; it is placed on the Union market by a provider established "
        "in a third country.",
        sender="Predictive policing vendor", recipient="Law enforcement agencies", subject="Citizens",
        information_type="Biometric data",
    ),
    desk_case(
        "aiact-spamfilter", "AI_ACT", "NOT_APPLICABLE",
        "A company runs a fixed keyword rule to move unsolicited bulk email into a junk folder.",
        sender="Mail server", recipient="Junk folder", subject="Employees", information_type="Email",
    ),
]

LAWS = ["HIPAA", "GDPR", "AI_ACT"]
GRID = {
    ("HIPAA", "PERMITTED"): 86, ("HIPAA", "PROHIBITED"): 19, ("HIPAA", "NOT_APPLICABLE"): 106,
    ("GDPR", "PERMITTED"): 675, ("GDPR", "PROHIBITED"): 2462, ("GDPR", "NOT_APPLICABLE"): 0,
    ("AI_ACT", "PERMITTED"): 1029, ("AI_ACT", "PROHIBITED"): 971, ("AI_ACT", "NOT_APPLICABLE"): 1000,
}
SENDERS = ["Hospital", "Bank", "Employer", "Retailer", "School", "Insurer", "Provider", "Agency"]
RECIPIENTS = ["Regulator", "Advertiser", "Parent", "Researcher", "Vendor", "Public"]


def grid_cases():
    rng = random.Random(3)
    cases = []
    for law in LAWS:
        for gold in ["PERMITTED", "PROHIBITED", "NOT_APPLICABLE"]:
            for i in range(GRID[(law, gold)]):
                cases.append({
                    "id": f"{law.lower()}-{gold.lower()}-{i:04d}",
                    "domain": law,
                    "narrative": f"Synthetic {law} event {len(cases)}.",
                    "annotation": {"sender": rng.choice(SENDERS), "recipient": rng.choice(RECIPIENTS)},
                    "gold": gold,
                })
    rng.shuffle(cases)
    return cases


LETTER = {"PROHIBITED": "A", "PERMITTED": "B", "NOT_APPLICABLE": "C"}


def reward_items():
    """Responses in assorted shapes with the letter a correct extractor must find (or null)."""
    rng = random.Random(50)
    shapes = [
        lambda l: (f"Choice: {l}", l),
        lambda l: (f"**Choice:** {l}. Something", l),
        lambda l: (f"Choice: **{l}**", l),
        lambda l: (f"I think Choice: A at first.\nOn reflection, Choice: {l}", l),
        lambda l: (
            "<|begin_of_thought|>\nthinking\n<|end_of_thought|>\n\n<CI>sender: ['X']</CI>\n\n"
            f"<|begin_of_solution|>\nChoice: {l}. done\n<|end_of_solution|>", l),
        lambda l: ("<|begin_of_thought|>\nno answer\n<|end_of_thought|>\n"
                   "<|begin_of_solution|>\nI cannot decide.\n<|end_of_solution|>", None),
        lambda l: ("The answer is obviously the first one.", None),
        lambda l: ("Choice: D", "D"),
    ]
    items = []
    for i in range(50):
        case = DESK[i % len(DESK)]
        letter = rng.choice("ABC")
        text, expected = shapes[i % len(shapes)](letter)
        items.append({"case_id": case["id"], "response_text": text, "expected_letter": expected})
    return items


def write_json(name, value, compact=False):
    path = HERE / name
    if compact:
        body = "[\n" + ",\n".join(json.dumps(v, ensure_ascii=False) for v in value) + "\n]\n"
    else:
        body = json.dumps(value, indent=2, ensure_ascii=False) + "\n"
    path.write_text(body, encoding="utf-8")


def main():
    write_json("desk_cases.json", DESK)
    write_json("grid_cases.json", grid_cases(), compact=True)
    write_json("reward_items.json", reward_items())

    # 4 predictions, 3 of them correct.
    preds = [
        ("gdpr-realestate", "Choice: A. Prohibited"),
        ("gdpr-agent", "**Choice:** B"),
        ("hipaa-gym", "Reasoning...\\nChoice: C. Not related"),
        ("aiact-predictive", "Choice: B. Permitted"),
    ]
    (HERE / "predictions.tsv").write_text("".join(f"{i}\t{r}\n" for i, r in preds), encoding="utf-8")

    gold = [(c["id"], c["gold"]) for c in DESK]
    (HERE / "eval_gold.tsv").write_text("".join(f"{i}\t{g}\n" for i, g in gold), encoding="utf-8")
    flipped = {"gdpr-passwords": "PERMITTED", "hipaa-gym": "PROHIBITED"}
    (HERE / "eval_pred.tsv").write_text(
        "".join(f"{i}\t{flipped.get(i, g)}\n" for i, g in gold), encoding="utf-8")

    kg = ["# sender\tsubject\trecipient\tattributes"]
    for c in DESK:
        a = c["annotation"]
        attrs = ",".join(a.get("attributes", []))
        kg.append("\t".join([a["sender"], a["subject"], a["recipient"], attrs]))
    (HERE / "kg.tsv").write_text("\n".join(kg) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
