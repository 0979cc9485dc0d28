"""Task-oriented grasp quality metrics on triangle meshes.

Simulates a simplified three-finger grasp policy, computes a 12-value metric
vector per (object, grasp, use point) triplet, scores task affordances for
beating / cutting / picking, and generates labeled datasets with
camera-in-hand range images.
"""

__version__ = "0.1.0"
