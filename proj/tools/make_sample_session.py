#!/usr/bin/env python3
"""Writes data/sample_session.ndjson, the scripted lecture behind the golden transcript.

The session covers every tone and gesture label, partial hypotheses revised
to finals (and one trailing partial that is never revised), same-label tone
suppression, an equal-confidence tone tie, a duplicate gesture, a gesture in
a pause, and a low-confidence tone.
"""

import json
import pathlib
import sys

SPEAKER = "S1"


def words(triples):
    """[(text, t0, t1)] -> asr token dicts (final)."""
    return [dict(text=t, t0=a, t1=b, stability="final", conf=0.92) for t, a, b in triples]


asr = []
asr += words([("Good", 1000, 1300), ("morning", 1320, 1800), ("everyone.", 1820, 2400)])
# "volt" is an interim hypothesis later replaced by the final "voltage".
asr += words([("The", 5230, 5500)])
asr += [dict(text="volt", t0=5520, t1=5800, stability="partial", conf=0.55)]
asr += words([("voltage", 5520, 5990), ("here", 6010, 6240), ("is", 6260, 6380), ("critical.", 6400, 6800)])
asr += words([("Look", 8000, 8250), ("at", 8270, 8400), ("this", 8420, 8700), ("circuit.", 8720, 9300)])
asr += words([("It", 10000, 10150), ("charges", 10170, 10600), ("quickly!", 10620, 11000)])
asr += words([("Why", 13000, 13300), ("does", 13320, 13600), ("it", 13620, 13750), ("do", 13770, 13950),
              ("that?", 13970, 14400)])
# One interim phrase revised into two final words.
asr += [dict(text="Oh grea", t0=16000, t1=16500, stability="partial", conf=0.5)]
asr += words([("Oh", 16000, 16200), ("great,", 16250, 16600), ("another", 16620, 17000), ("exam.", 17020, 17500)])
asr += words([("Hand", 19000, 19250), ("in", 19270, 19400), ("your", 19420, 19600), ("work", 19620, 19900),
              ("now.", 19920, 20300)])
asr += words([("Okay.", 21500, 22000)])
asr += words([("Now", 23000, 23250), ("current", 23270, 23700), ("flows", 23720, 24100), ("across", 24120, 24500),
              ("the", 24520, 24650)])
# Trailing interim hypotheses that are never finalized: "circui" is promoted.
asr += [dict(text="cir", t0=24670, t1=24850, stability="partial", conf=0.4),
        dict(text="circui", t0=24670, t1=25000, stability="partial", conf=0.5)]


def cue(kind, label, t0, t1, conf):
    return dict(kind=kind, label=label, t0=t0, t1=t1, conf=conf)


affect = [
    cue("tone", "calm", 1000, 2400, 0.9),
    cue("tone", "concerned", 5400, 6700, 0.81),
    # Equal confidence and span: the lexicographically smaller label wins.
    cue("tone", "urgent", 8000, 9300, 0.7),
    cue("tone", "excited", 8000, 9300, 0.7),
    # Same label 700 ms after the previous segment: suppressed.
    cue("tone", "excited", 10000, 11000, 0.9),
    cue("tone", "confused", 13000, 14400, 0.75),
    cue("tone", "sarcastic", 16000, 17500, 0.8),
    cue("tone", "urgent", 19000, 20300, 0.85),
    cue("tone", "neutral", 21500, 22000, 0.95),
    # Below the confidence threshold.
    cue("tone", "calm", 23000, 24600, 0.5),
]

gesture = [
    cue("gesture", "nods", 1250, 1450, 0.88),
    # Same label 300 ms later: dropped as a duplicate.
    cue("gesture", "nods", 1500, 1800, 0.8),
    # In the pause between sentences: dropped.
    cue("gesture", "shrugs", 3000, 3400, 0.7),
    cue("gesture", "pointing", 8550, 8850, 0.9),
    cue("gesture", "head-shake", 13100, 13500, 0.77),
    cue("gesture", "shrugs", 17000, 17400, 0.83),
    cue("gesture", "hand-raise", 19300, 19800, 0.91),
]

# Arrival delay per source relative to an event's end.
DELAY = {"asr": 60, "affect": 350, "gesture": 180}


def lane(src, events, beat_every):
    """Sequenced events plus watermark beats, each with an arrival time."""
    out = []
    seq = 1
    for i, ev in enumerate(events):
        rec = {"v": 1, "src": src}
        if src == "asr":
            rec.update(type="token", seq=seq, t0=ev["t0"], t1=ev["t1"], text=ev["text"], speaker=SPEAKER,
                       stability=ev["stability"], conf=ev["conf"])
        else:
            rec.update(type="cue", seq=seq, t0=ev["t0"], t1=ev["t1"], kind=ev["kind"], label=ev["label"],
                       conf=ev["conf"])
        seq += 1
        arrival = ev["t1"] + DELAY[src]
        out.append((arrival, rec))
        nxt = events[i + 1]["t0"] if i + 1 < len(events) else None
        if i % beat_every == beat_every - 1 or nxt is None:
            t = arrival if nxt is None else min(arrival, nxt)
            out.append((arrival, {"v": 1, "src": src, "type": "watermark", "t": t}))
    return out


def merge(*lanes):
    """Interleave by arrival time while keeping each lane's own order."""
    keyed = []
    for li, items in enumerate(lanes):
        last = 0
        for k, (arrival, rec) in enumerate(items):
            last = max(last, arrival)
            keyed.append(((last, li, k), rec))
    keyed.sort(key=lambda x: x[0])
    return [rec for _, rec in keyed]


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/sample_session.ndjson")
    lines = merge(lane("asr", asr, 3), lane("affect", affect, 2), lane("gesture", gesture, 1))
    out.write_text("".join(json.dumps(r, separators=(",", ":")) + "\n" for r in lines))


if __name__ == "__main__":
    main()
