"""Generate a small dataset over a few objects and search it per task.

Runs about a minute on one core; bump COUNT for better argmax quality.
"""
import tempfile
from pathlib import Path

from tgqm import affordance, pipeline
from tgqm.affordance import Task
from tgqm.pipeline import RunConfig

COUNT = 3000
OBJECTS = ["builtin:hammer", "builtin:knife", "builtin:glass"]


def main():
    out = Path(tempfile.mkdtemp()) / "dataset.csv"
    cfg = RunConfig(objects=OBJECTS, count=COUNT, seed=7)
    summary = pipeline.generate_dataset(cfg, out)
    print(f"dataset: {summary['count']} records, {summary['reached']} reached, "
          f"{summary['viable']} viable ({summary['viability_rate']:.2%}) "
          f"in {summary['wall_time_s']:.0f}s -> {out}")

    records = pipeline.read_dataset(out)
    thresholds = affordance.preset("no_robustness")
    for task in Task:
        print(f"\ntop {task.value} grasps:")
        try:
            ranked = pipeline.argmax_search(records, task, thresholds, top_k=3)
        except pipeline.EmptyResult as exc:
            print(f"  (empty: {exc})")
            continue
        for i, (rec, score) in enumerate(ranked):
            print(f"  {i + 1}. score {score:10.4g}  eps {rec.phi[0]:.3f}  "
                  f"contacts {rec.n_contacts}  {rec.object_id}")


if __name__ == "__main__":
    main()
