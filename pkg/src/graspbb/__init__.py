"""Globally optimal grasp planning via two-level branch-and-bound.

High level: best-first search over KD-tree subsets of candidate surface
contact points, bounded by a monotonic grasp metric.  Low level: a
mixed-integer conic feasibility program for the gripper's inverse
kinematics with lazily added collision constraints.
"""

__version__ = "0.1.0"
