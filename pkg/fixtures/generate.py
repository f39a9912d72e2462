"""Regenerates every generated fixture under fixtures/.

Deterministic by construction: fixed constants only, no RNG, so a rerun
reproduces the committed files byte for byte. Run from the repo root:

    python3 fixtures/generate.py

Hand-authored fixtures (answers/cases.json, the demo files) are not
touched here; they hold independently derived expected values.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from eventlens.domain import FrameRef, VideoMeta
from eventlens.manifest import FrameManifest, save_manifest

ROOT = os.path.dirname(os.path.abspath(__file__))

# layout shared by the synthetic landscapes: five peak channels, one
# floor channel, then optional segment-identity channels
N_PEAKS = 5
FLOOR = 0.2


def _meta(video_id: str, n_frames: int) -> VideoMeta:
    return VideoMeta(
        video_id=video_id,
        duration_s=float(n_frames - 1),
        fps_native=30.0,
        width=320,
        height=240,
    )


def _manifest(video_id: str, vectors: list[np.ndarray]) -> FrameManifest:
    frames = [
        FrameRef(
            index=i,
            timestamp_s=float(i),
            source=f"{video_id}/frame_{i:05d}",
            embedding=vec.astype(np.float32),
        )
        for i, vec in enumerate(vectors)
    ]
    return FrameManifest(video=_meta(video_id, len(vectors)), sampling_fps=1.0, frames=frames)


def peaked_vectors(
    n_frames: int,
    truth: tuple[int, int],
    sigma: float,
    amp: float,
    segment_channels: int = 0,
    segment_mag: float = 0.0,
) -> list[np.ndarray]:
    """Frame vectors with Gaussian bumps anchored inside the truth span.

    Peak q sits at truth_begin + q/4 of the span. With segment channels,
    frames before / inside / after the truth span get an extra one-hot
    component so a plain moving-average pass recovers those three runs.
    """
    tb, te = truth
    peaks = [tb + (te - tb) * q / (N_PEAKS - 1) for q in range(N_PEAKS)]
    dim = N_PEAKS + 1 + segment_channels
    out = []
    for f in range(n_frames):
        vec = np.zeros(dim)
        for q, p in enumerate(peaks):
            vec[q] = amp * math.exp(-((f - p) ** 2) / (2 * sigma * sigma))
        vec[N_PEAKS] = FLOOR
        if segment_channels:
            seg = 0 if f < tb else (1 if f <= te else 2)
            vec[N_PEAKS + 1 + seg] = segment_mag
        out.append(vec / np.linalg.norm(vec))
    return out


def peak_text_table(dim: int) -> dict[str, list[float]]:
    table = {}
    for q in range(N_PEAKS):
        vec = [0.0] * dim
        vec[q] = 1.0
        table[f"seg {q}"] = vec
    return table


SEG_TUPLES = [["seg", str(q)] for q in range(N_PEAKS)]


def write_json(path: str, obj) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def save(manifest: FrameManifest, path: str) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    save_manifest(manifest, path)


# ---------------------------------------------------------------- blocks


def gen_blocks() -> None:
    expected = {}
    for k in (2, 3, 5):
        for length in (3, 5, 10):
            vid = f"blk_k{k}_l{length}"
            vectors = []
            for i in range(k * length):
                vec = np.zeros(k)
                vec[i // length] = 1.0
                vectors.append(vec)
            save(_manifest(vid, vectors), os.path.join(ROOT, "blocks", f"{vid}.json"))
            expected[vid] = {
                "n_events": k,
                "regions": [[b * length, b * length + length - 1] for b in range(k)],
            }
    write_json(os.path.join(ROOT, "blocks", "expected.json"), expected)


# ------------------------------------------------------------- hillclimb


def gen_hillclimb() -> None:
    base = os.path.join(ROOT, "hillclimb")
    save(
        _manifest("climb01", peaked_vectors(100, (20, 40), sigma=4.0, amp=1.0)),
        os.path.join(base, "manifest.json"),
    )
    save(
        _manifest("climb600", peaked_vectors(600, (200, 400), sigma=20.0, amp=1.0)),
        os.path.join(base, "manifest_n600.json"),
    )
    instruction = "trace the marked activity"
    write_json(
        os.path.join(base, "stubs.json"),
        {
            "embed_text": {"table": peak_text_table(N_PEAKS + 1)},
            "oie": {"table": {instruction: SEG_TUPLES}},
        },
    )
    write_json(os.path.join(base, "instructions.json"), [instruction])
    write_json(
        os.path.join(base, "regions_trajectories.json"),
        {"regions": [{"begin": 30, "end": 50}]},
    )
    write_json(
        os.path.join(base, "regions_symmetric.json"),
        {"regions": [{"begin": 28, "end": 33}]},
    )
    write_json(
        os.path.join(base, "config.json"),
        {
            "providers.embed_text.endpoint": "stub:lookup",
            "providers.oie.endpoint": "stub:lookup",
            "providers.script_file": "fixtures/hillclimb/stubs.json",
        },
    )
    # regression pins observed from the frozen landscape; the properties
    # that matter (strict score increase, proximity to truth) are asserted
    # independently in the tests
    write_json(
        os.path.join(base, "expected.json"),
        {
            "truth": [20, 40],
            "trajectories": {"init": [30, 50], "final": [20, 40]},
            "symmetric": {"init": [28, 33], "final": [18, 43]},
        },
    )


# --------------------------------------------------------------- microqa

# per video: truth span, landscape kind, question type, option texts,
# index of the correct option, and the letter the scripted model returns
# when the prompted frames miss the span
MICROQA = [
    ("v01", (8, 28), "flip", "Interaction",
     "What does the person handle during the highlighted event?",
     ["the cutting board", "the kettle", "the drawer", "the remote"], 0, "C"),
    ("v02", (32, 52), "flip", "Interaction",
     "Which object is picked up while the event unfolds?",
     ["a towel", "a red mug", "a phone", "a pair of scissors"], 1, "D"),
    ("v03", (20, 40), "centered", "Interaction",
     "What surface does the person lean on in this event?",
     ["the window sill", "the couch arm", "the kitchen counter", "the door frame"], 2, "A"),
    ("v04", (6, 26), "flip", "Sequence",
     "What happens immediately after the drawer is opened?",
     ["the light turns off", "the person sits down", "water starts running", "a utensil is taken out"], 3, "B"),
    ("v05", (10, 30), "centered", "Sequence",
     "Which action comes first in the highlighted span?",
     ["reaching for the shelf", "closing the cabinet", "wiping the table", "turning around"], 0, "D"),
    ("v06", (8, 28), "dead", "Sequence",
     "What does the person do right before leaving the room?",
     ["waves at the camera", "switches off the stove", "picks up a bag", "checks the clock"], 1, "C"),
    ("v07", (34, 54), "flip", "Prediction",
     "What is the person most likely to do next?",
     ["start chopping vegetables", "leave the kitchen", "pour the boiling water", "open the fridge"], 2, "B"),
    ("v08", (8, 28), "flip", "Prediction",
     "After this event, which state will the table be in?",
     ["still cluttered", "covered with a cloth", "moved to the wall", "cleared of dishes"], 3, "A"),
    ("v09", (32, 52), "dead", "Prediction",
     "What will the person reach for once the event ends?",
     ["the faucet handle", "the spice rack", "the oven door", "the trash bin"], 0, "B"),
    ("v10", (32, 52), "flip", "Feasibility",
     "Could the person stir the pot during this event?",
     ["no, both hands stay occupied", "yes, one hand is free", "no, the pot is out of reach", "yes, but only after moving"], 1, "A"),
    ("v11", (30, 50), "centered", "Feasibility",
     "Is it possible to close the cabinet from where the person stands?",
     ["no, the angle is wrong", "only with the left hand", "yes, it is within reach", "no, the cabinet is blocked"], 2, "D"),
    ("v12", (6, 26), "dead", "Feasibility",
     "Can the person see the screen while performing the action?",
     ["yes, directly", "only in the mirror", "yes, over the shoulder", "no, the screen faces away"], 3, "C"),
]

MICRO_N = 60
MICRO_SIGMA = 6.0
MICRO_AMP = 0.5
MICRO_SEG_MAG = 3.0
MICRO_DIM = N_PEAKS + 1 + 3

MICRO_INSTRUCTION = "trace the highlighted action segments"

SCENE_TRIPLES = [
    {
        "subject": {"label": "person", "box": [12.0, 20.0, 150.0, 210.0]},
        "predicate": "holds",
        "object": {"label": "cup", "box": [96.0, 118.0, 142.0, 176.0]},
        "confidence": 0.9,
    },
    {
        "subject": {"label": "person", "box": [12.0, 20.0, 150.0, 210.0]},
        "predicate": "near",
        "object": {"label": "table", "box": [40.0, 150.0, 300.0, 238.0]},
        "confidence": 0.3,
    },
]


def gen_microqa() -> None:
    base = os.path.join(ROOT, "microqa")
    coverage_spec = {}
    truth_doc = {}
    lines = []
    for vid, truth, kind, qtype, question, options, answer_index, miss in MICROQA:
        amp = 0.0 if kind == "dead" else MICRO_AMP
        vectors = peaked_vectors(
            MICRO_N, truth, sigma=MICRO_SIGMA, amp=amp,
            segment_channels=3, segment_mag=MICRO_SEG_MAG,
        )
        save(_manifest(vid, vectors), os.path.join(base, "manifests", f"{vid}.json"))
        hit = chr(ord("A") + answer_index)
        coverage_spec[vid] = {"span": [float(truth[0]), float(truth[1])], "hit": hit, "miss": miss}
        truth_doc[vid] = {"span": list(truth), "kind": kind}
        lines.append(
            {
                "video_id": vid,
                "question": question,
                "question_type": qtype,
                "options": options,
                "answer_index": answer_index,
            }
        )
    os.makedirs(base, exist_ok=True)
    with open(os.path.join(base, "dataset.jsonl"), "w", encoding="utf-8") as fh:
        for rec in lines:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    write_json(
        os.path.join(base, "stubs.json"),
        {
            "llm": {
                "rules": [
                    {"contains": "Options:", "answer_by_coverage": coverage_spec},
                    {"contains": "one sentence", "text": MICRO_INSTRUCTION},
                ],
                "default": "A",
            },
            "oie": {"table": {MICRO_INSTRUCTION: SEG_TUPLES}},
            "embed_text": {"table": peak_text_table(MICRO_DIM)},
            "caption": {"caption": "a person works through a task"},
            "scene_graph": {"triples": SCENE_TRIPLES},
        },
    )
    write_json(
        os.path.join(base, "config.json"),
        {
            "providers.embed_text.endpoint": "stub:lookup",
            "providers.oie.endpoint": "stub:lookup",
            "providers.caption.endpoint": "stub:fixed",
            "providers.scene_graph.endpoint": "stub:fixed",
            "providers.llm.endpoint": "stub:scripted",
            "providers.script_file": "fixtures/microqa/stubs.json",
            "demos.qa": "fixtures/microqa/demos_qa.json",
        },
    )
    write_json(os.path.join(base, "truth.json"), truth_doc)


# --------------------------------------------------------------- microdvc

MICRODVC = {
    "d01": {
        "caption": "wipe the counter with a damp cloth",
        "sentences": [
            "a person wipes down the counter",
            "the counter gets cleaned with a cloth",
            "someone finishes wiping the counter surface",
        ],
    },
    "d02": {
        "caption": "pour water into the red kettle",
        "sentences": [
            "a person lifts the red kettle",
            "water is poured into the kettle",
            "the kettle is set back on the stove",
        ],
    },
    "d03": {
        "caption": "fold the towels on the shelf",
        "sentences": [
            "a person takes towels off the shelf",
            "the towels are folded one by one",
            "folded towels are stacked on the shelf",
        ],
    },
}

DVC_N = 60
DVC_BLOCK = 20


def gen_microdvc() -> None:
    base = os.path.join(ROOT, "microdvc")
    dataset = {}
    oie_table = {}
    text_table = {}
    for vid, spec in MICRODVC.items():
        vectors = []
        for i in range(DVC_N):
            vec = np.zeros(4)
            vec[i // DVC_BLOCK] = MICRO_SEG_MAG
            vec[3] = FLOOR
            vectors.append(vec / np.linalg.norm(vec))
        save(_manifest(vid, vectors), os.path.join(base, "manifests", f"{vid}.json"))
        dataset[vid] = {
            "duration": float(DVC_N - 1),
            "timestamps": [[float(b * DVC_BLOCK), float(b * DVC_BLOCK + DVC_BLOCK - 1)] for b in range(3)],
            "sentences": spec["sentences"],
        }
        caption = spec["caption"]
        parts = caption.split(" ", 1)
        oie_table[caption] = [[parts[0], parts[1]]]
        # the floor channel only: alignment scores tie everywhere, so
        # refinement keeps the initialized regions
        text_table[caption] = [0.0, 0.0, 0.0, 1.0]
    write_json(os.path.join(base, "dataset.json"), dataset)
    write_json(
        os.path.join(base, "stubs.json"),
        {
            "llm": {
                "rules": [
                    {
                        "contains": "one sentence",
                        "instruction_by_video": {vid: spec["caption"] for vid, spec in MICRODVC.items()},
                    }
                ],
                "default": "continue the task",
            },
            "oie": {"table": oie_table},
            "embed_text": {"table": text_table},
            "caption": {"caption": "a person works at the counter"},
            "scene_graph": {"triples": SCENE_TRIPLES},
        },
    )
    write_json(
        os.path.join(base, "config.json"),
        {
            "providers.embed_text.endpoint": "stub:lookup",
            "providers.oie.endpoint": "stub:lookup",
            "providers.caption.endpoint": "stub:fixed",
            "providers.scene_graph.endpoint": "stub:fixed",
            "providers.llm.endpoint": "stub:scripted",
            "providers.script_file": "fixtures/microdvc/stubs.json",
            "demos.instruction": "fixtures/microdvc/demos_instruction.json",
        },
    )


# ---------------------------------------------------------------- stuball


def gen_stuball() -> None:
    """Tiny QA set that runs end to end on the built-in stub providers.

    Frames carry no embeddings on purpose: under forced stubs both image
    and text vectors come from the same hashing family, so they share a
    dimension without any precomputed data.
    """
    base = os.path.join(ROOT, "stuball")
    n = 40
    frames = [
        FrameRef(index=i, timestamp_s=float(i), source=f"s01/frame_{i:05d}")
        for i in range(n)
    ]
    manifest = FrameManifest(video=_meta("s01", n), sampling_fps=1.0, frames=frames)
    save(manifest, os.path.join(base, "manifests", "s01.json"))
    items = [
        {
            "video_id": "s01",
            "question": "What is the person doing in the clip?",
            "question_type": "Interaction",
            "options": ["washing dishes", "reading a book", "tying shoes", "opening a jar"],
            "answer_index": 0,
        },
        {
            "video_id": "s01",
            "question": "What happens right after the clip ends?",
            "question_type": "Prediction",
            "options": ["the light goes off", "a door opens", "water boils", "nothing changes"],
            "answer_index": 2,
        },
    ]
    os.makedirs(base, exist_ok=True)
    with open(os.path.join(base, "dataset.jsonl"), "w", encoding="utf-8") as fh:
        for rec in items:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def main() -> None:
    gen_blocks()
    gen_hillclimb()
    gen_microqa()
    gen_microdvc()
    gen_stuball()
    print("fixtures written under", ROOT)


if __name__ == "__main__":
    main()
