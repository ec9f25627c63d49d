"""Render one scene under the three text conditions.

The scene is a left turn at a junction 20 m ahead with a red light, a
sedan ahead and a pedestrian stepping into the crossing from the right.
Run from the repository root:  python3 demos/01_narration.py
"""

import json
from pathlib import Path

from csnkit import narrator
from csnkit.scene import SceneState

SCENE = Path(__file__).parents[1] / "tests" / "golden" / "left_turn_scene.json"

data = json.loads(SCENE.read_text())
scene = SceneState.from_dict(data)
bundle = narrator.narrate(scene, data["intent"])

print("template (fixed phrase, no measurements):")
for line in bundle.template:
    print("   ", line)
print("\nflat (every fact, no causal links):")
print("   ", bundle.flat)
print("\ncsn (same facts, connected by BUT / BEFORE / BECAUSE):")
for line in bundle.csn:
    print("   ", line)

# The pipeline underneath: relevance filter -> urgency ranking -> conflict typing.
print("\nrelevant constraints, most urgent first:")
for rec in narrator.rank_urgency(narrator.filter_relevant(scene, data["intent"])):
    name = rec.actor.id if rec.actor else rec.actor_or_signal.kind
    print(f"    {name:<12} {rec.conflict_type.value:<12} {rec.distance_m:5.1f} m")
