"""Regenerate the toy dialog fixture and the worked-example fixture.

Writes into ``tests/fixtures/{toy,cases}``. The output is fully determined by
the tables below, so rerunning this script is a no-op on a clean checkout.

    python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from aspectchain.datasets import (
    AspectDecl,
    DatasetManifest,
    write_instances,
    write_manifest,
)
from aspectchain.model import EvaluationInstance

ROOT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

# A list of five aspects in the bolded "Name: description" style that chat
# judges produce for the overall-quality target.
ASPECT_LIST = "\n".join([
    "**Relevance**: Is the response directly related to the conversation and addresses the query or topic at hand? A high-quality response should be relevant and provide useful information or address the user's concerns.",
    "**Coherence**: Does the response make sense and flow logically within the context of the conversation? A well-structured and coherent response is easier to understand and indicates a higher quality.",
    "**Completeness**: Does the response fully answer the user's question or provide a comprehensive solution? A high-quality response should not leave any important aspects unaddressed and should provide all the necessary information.",
    "**Accuracy**: Is the response factually correct and free from errors or misleading information? A reliable response should be accurate and provide trustworthy information to the user.",
    "**Naturalness**: Does the response sound natural and human-like? A high-quality response should be fluent, grammatically correct, and use appropriate language and tone within the conversational context.",
])
NAMES = ("Relevance", "Coherence", "Completeness", "Accuracy", "Naturalness")


def score_lines(values) -> str:
    return "\n".join(f"**{n}**: {v:.1f}" for n, v in zip(NAMES, values))


# id, fact, conversation, response, reference, overall (3 raters), natural, understandable,
# stage-2 scores, stage-3 scalar, llmscore scalar
TOY = [
    ("toy-01", "The first film with sound was released in 1927.",
     "A: Do you like old movies?\nB: Some of them. Silent films are fun.",
     "The first movie with sound came out in 1927, a huge shift for silent stars.",
     "Did you know the first sound film came out in 1927?",
     (5, 5, 4), (3, 3, 3), (1, 1, 1), (5, 5, 4, 5, 5), "5.0", "4"),
    ("toy-02", "Octopuses have three hearts.",
     "A: What animal do you find strangest?\nB: Probably the octopus.",
     "ok",
     "Octopuses are wild, they even have three hearts!",
     (1, 2, 1), (2, 1, 2), (1, 0, 1), (2, 3, 1, 3, 3), "2.0", "2"),
    ("toy-03", "Honey never spoils.",
     "A: I keep a jar of honey in my pantry.\nB: How long have you had it?",
     "Honey never spoils, so it is probably still fine.",
     "Honey basically never goes bad, archaeologists found edible honey in tombs.",
     (4, 4, 5), (3, 3, 2), (1, 1, 1), (5, 4, 4, 5, 4), "4.5", "4"),
    ("toy-04", "Bananas are berries but strawberries are not.",
     "A: Fruit trivia time.\nB: Go for it.",
     "I like trains.",
     "Bananas count as berries, but strawberries do not.",
     (1, 1, 2), (1, 2, 1), (0, 1, 0), (1, 2, 1, 2, 2), "1.0", "2"),
    ("toy-05", "The Eiffel Tower grows in summer.",
     "A: I visited Paris last summer.\nB: Did you go up the Eiffel Tower?",
     "Yes, and apparently it grows a bit taller in the summer heat.",
     "I did! Funny thing, the tower gets taller when it is hot.",
     (5, 4, 5), (3, 3, 3), (1, 1, 1), (5, 5, 4, 4, 5), "5.0", "3"),
    ("toy-06", "Sharks existed before trees.",
     "A: Are sharks old as a species?\nB: Very old.",
     "Sharks are older than trees, which is hard to imagine.",
     "They are older than trees, believe it or not.",
     (4, 3, 4), (2, 3, 3), (1, 1, 1), (4, 4, 3, 4, 4), "4.0", "3"),
    ("toy-07", "Venus rotates backwards.",
     "A: Which planet is your favorite?\nB: Venus, it is weird.",
     "Venus is nice i guess i guess.",
     "Venus spins the opposite way from most planets.",
     (2, 2, 3), (2, 2, 1), (1, 0, 1), (3, 3, 2, 3, 2), "2.5", "3"),
    ("toy-08", "Cows have best friends.",
     "A: I grew up on a farm.\nB: With cows?",
     "Yes, and cows actually form close friendships with each other.",
     "We had cows, they even have best friends in the herd.",
     (4, 5, 4), (3, 3, 3), (1, 1, 1), (5, 5, 4, 4, 5), "4.5", "4"),
    ("toy-09", "Wombat droppings are cube shaped.",
     "A: Australia has strange animals.\nB: Like what?",
     "Kangaroos.",
     "Wombats, their droppings are cube shaped.",
     (2, 3, 2), (2, 3, 2), (1, 1, 0), (3, 2, 2, 4, 3), "3.0", "2"),
    ("toy-10", "A day on Venus is longer than its year.",
     "A: Space facts are my thing.\nB: Tell me one.",
     "A day on Venus lasts longer than a whole Venus year.",
     "On Venus a single day is longer than the year.",
     (5, 5, 5), (3, 3, 3), (1, 1, 1), (5, 5, 5, 5, 5), "5.0", "5"),
    ("toy-11", "Some cats are allergic to humans.",
     "A: My cat sneezes a lot.\nB: Maybe allergies?",
     "Cats can sneeze from dust.",
     "Funny enough, some cats are allergic to people.",
     (3, 3, 3), (3, 2, 3), (1, 1, 1), (3, 4, 3, 4, 4), "3.5", "3"),
    ("toy-12", "The shortest war lasted 38 minutes.",
     "A: History is boring.\nB: Not always!",
     "whatever",
     "The shortest war in history was over in 38 minutes.",
     (1, 1, 1), (1, 1, 2), (0, 0, 1), (1, 1, 1, 2, 1), "1.5", "1"),
]


def build_toy(out: Path) -> None:
    instances = [
        EvaluationInstance(
            id=ident, task="dialog", source=conv, hypothesis=resp, references=(ref,), fact=fact,
            human_scores={"overall": overall, "natural": natural, "understandable": und},
        )
        for ident, fact, conv, resp, ref, overall, natural, und, *_ in TOY
    ]
    manifest = DatasetManifest(
        id="toy-dialog", task="dialog", path=str(out / "toy.jsonl"), expected_size=len(instances),
        aspects=(
            AspectDecl("overall", 1, 5, annotators=3),
            AspectDecl("natural", 1, 3, annotators=3),
            AspectDecl("understandable", 0, 1, annotators=3),
        ),
    )
    write_instances(instances, out / "toy.jsonl")
    write_manifest(manifest, out / "toy.manifest.json")
    rules = [{"match": "aspect_gen:*", "response": ASPECT_LIST}]
    for ident, *_, stage2, stage3, base in TOY:
        rules += [
            {"match": f"aspect_score:{ident}", "response": score_lines(stage2)},
            {"match": f"coa_score:{ident}", "response": stage3},
            {"match": f"llmscore:{ident}", "response": base},
        ]
    rules += [
        {"match": "llmscore_cot:*:reason", "response": "The response is grounded in the fact and reads fluently."},
        {"match": "llmscore_cot:*:score", "response": "4"},
    ]
    (out / "toy.script.json").write_text(json.dumps({"rules": rules}, indent=2) + "\n", encoding="utf-8")


KUNG_FU = EvaluationInstance(
    id="kungfu",
    task="dialog",
    fact='Bill murray thinks kung fu hustle is "the supreme achievement of the modern age in terms of comedy".',
    source="\n".join([
        "A: Morning ! are you a comedy fan?",
        "B: Morning ! yes, some of it. Have you watched anything good recently?",
        "A: Kung fu hustle . ever seen it? It 's hilarious.",
        "B: i haven't ! what is it about? Does it have bruce lee in it?",
        "A: No, it's much more recent. Steven chow directed it. Bill murray loved it too.",
    ]),
    hypothesis='Yeah bill murray called it "the supreme achievement of the modern age in terms of comedy"',
    human_scores={"overall": (5.0,)},
)

SHARKS = EvaluationInstance(
    id="sharks",
    task="dialog",
    source="\n".join([
        "A: Hi , how are you?",
        "B: I am good, thank you. I enjoy travel. Do you?",
        "A: I do but I am a worrying traveler. Where is the best place you have been to?",
        "B: I have not been out of the country but several places in the country. I like chicago a lot. Did you know that all of japans highways are tolls?",
        "A: That's got ta be expensive! what's the best place in chicago? where should I go when i visit?",
        "B: I like the natural history museum and millennium park. Lou malnati's has amazing pizza. It is very expensive to travel in japan. It costs more than $300 to travel across the country.",
        "A: That's a lot. I can not imagine having to pay that in tolls. I do like lou 's pizza. Have you been to wrigley field? I should ask first if you are a baseball fan ...",
        "B: I have not. We did stop outside of soldier field but didn't get to go in. Did you know that iceland has no public rail service?",
        "A: That's odd. Soldier field is just ok. The shedd is really good though. where else, besides chicago do you like going?",
        "B: I enjoyed the mountains of tennessee. They are beautiful. We got a cabin with an amazing view. I would go to a lot more places if you could get there faster. The dutch are working on that. They are creating a commuter bus that goes 160 mph. That would be great.",
        "A: Can you imagine the movie speed on that bus!!!! holy smokes!",
        "B: Ha ha, yes that would change that movie quite a bit. Back to iceland , most don't have cars and travel between towns by flight!",
        "A: Really. Seems a little overkill but what do i know... I want to go there and see the northern lights some day.",
        "B: That would be a beautiful sight. Off topic but how do you feel about sharks?",
        "A: I'm for em!",
        "B: They are very interesting. Did you know that they don't have rib cages?",
    ]),
    hypothesis="Wow really? So their heart is unprotected?",
    human_scores={"overall": (5.0,)},
)


def build_cases(out: Path) -> None:
    manifest = DatasetManifest(
        id="dialog-cases", task="dialog", path=str(out / "cases.jsonl"), expected_size=2,
        aspects=(AspectDecl("overall", 1, 5),),
    )
    write_instances([KUNG_FU, SHARKS], out / "cases.jsonl")
    write_manifest(manifest, out / "cases.manifest.json")
    stage2 = score_lines((5, 5, 4, 5, 5))
    rules = [
        {"match": "aspect_gen:*", "response": ASPECT_LIST},
        {"match": "aspect_score:*", "response": stage2},
        {"match": "coa_score:*", "response": "5.0"},
        {"match": "llmscore:kungfu", "response": "4.0"},
        {"match": "llmscore:sharks", "response": "3.0"},
    ]
    (out / "cases.script.json").write_text(json.dumps({"rules": rules}, indent=2) + "\n", encoding="utf-8")


def main() -> None:
    for sub, build in (("toy", build_toy), ("cases", build_cases)):
        target = ROOT / sub
        target.mkdir(parents=True, exist_ok=True)
        build(target)
        print(f"wrote {target}")


if __name__ == "__main__":
    main()
