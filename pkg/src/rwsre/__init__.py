"""Simulation and verification lab for random walks in sparse random environments.

A nearest-neighbour walk on the integers moves symmetrically everywhere except
at a sparse random set of marked sites, where it feels a local drift.  This
package samples such environments, evaluates exact quenched moment formulas,
simulates first-passage times at three levels of resolution, samples the
candidate limit objects, and runs statistical pipelines that compare the two
sides of each limit theorem.
"""

__version__ = "0.1.0"
