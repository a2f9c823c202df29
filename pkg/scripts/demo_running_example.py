#!/usr/bin/env python3
"""Walk the bundled two-event example through the full pipeline and print
every intermediate artifact: the extracted spec, the flattened documents,
the pre-filter candidates, and the scored pair."""
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from kgdedup.compare import run_duplicate_detection
from kgdedup.index import build_index, more_like_this
from kgdedup.kg import parse_ntriples
from kgdedup.learn import default_config
from kgdedup.schema import extract_domain_spec


def main() -> int:
    events = parse_ntriples((ROOT / "fixtures" / "events.nt").read_text())
    shapes = parse_ntriples((ROOT / "fixtures" / "event_shape.nt").read_text())
    spec = extract_domain_spec(shapes, "https://example.org/ds/event", depth=1)
    print("extracted spec:")
    for ps in spec.properties:
        kind = "nested" if ps.is_nested_instance else ps.category.value
        card = "multi" if ps.multi_valued else "single"
        print(f"  {ps.field:28s} {kind:8s} {card}")

    index = build_index(events, spec)
    print("\nflattened documents:")
    for doc in index.docs.values():
        print(" ", doc.to_json_str())

    cfg = default_config(spec, spec)
    sample = next(iter(index.docs.values()))
    candidates = more_like_this(index, sample, cfg.pre_filter)
    print(f"\npre-filter candidates for {sample.id} at {cfg.pre_filter.threshold_pct}%:")
    for cand_id, matches in candidates:
        print(f"  {cand_id} ({matches} matching terms)")

    results = run_duplicate_detection(index, index, cfg)
    print("\nscored pairs:")
    for pair in results:
        flag = "accepted" if pair.accepted else "rejected"
        print(f"  {pair.source_id}  <->  {pair.target_id}")
        print(f"    similarity {pair.similarity:.4f} ({flag} at threshold {cfg.decision.threshold})")
        for path, sim in sorted(pair.per_path.items()):
            print(f"    {path:28s} {sim:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
