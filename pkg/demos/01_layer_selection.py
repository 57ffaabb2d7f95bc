"""Walk through the attribute dictionaries and the layer selector.

Each supported backbone ships two score tables (precision and success) with
one row per challenge attribute and one column per layer configuration.
Given the attributes a video is expected to exhibit, the selector averages
the matching rows of both tables and picks the best configuration.
"""

import numpy as np

from adatrack import (AttributeVector, channel_count, load_dictionaries,
                      score_configs, select_config)

catalog = load_dictionaries()

print("=== catalog overview ===")
for model in ("vggm", "vgg16", "googlenet", "resnet50"):
    labels = catalog.config_labels(model)
    print(f"{model:<10} {len(labels)} configurations, "
          f"e.g. {labels[0]!r} ... {labels[-1]!r}")

print()
print("=== single-attribute queries on ResNet-50 ===")
for tag in ("OCC", "LR", "MB", "DEF"):
    z = AttributeVector.from_names(tag)
    chosen = select_config("resnet50", z, catalog)
    scores = score_configs("resnet50", z, catalog)
    print(f"{tag:<4} -> {chosen.label:<18} K={channel_count(chosen):<5} "
          f"(top score {scores.max():.3f})")

print()
print("=== a combined query: occlusion + scale variation ===")
z = AttributeVector.from_names("OCC,SV")
for model in ("vggm", "vgg16", "googlenet", "resnet50"):
    chosen = select_config(model, z, catalog)
    print(f"{model:<10} -> {chosen.label:<18} K={channel_count(chosen)}")

print()
print("=== empty attribute vector falls back to the uniform average ===")
empty = select_config("resnet50", AttributeVector.zeros(), catalog)
full = select_config("resnet50", AttributeVector.ones(), catalog)
print(f"all-zero -> {empty.label}, all-one -> {full.label} (identical: "
      f"{empty == full})")

print()
print("=== full ranking for one query (ResNet-50, OCC) ===")
z = AttributeVector.from_names("OCC")
scores = score_configs("resnet50", z, catalog)
labels = catalog.config_labels("resnet50")
for j in np.argsort(-scores)[:8]:
    print(f"  {labels[j]:<20} {scores[j]:.3f}")
