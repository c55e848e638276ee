"""Language-conditioned trajectory optimization for a simulated arm.

Pipeline: parse a command, build a grounding graph over the scene,
infer groundings plus latent cost parameters, map them to a planning
problem, and optimize a trajectory that can be corrected mid-execution
by further commands.
"""

__version__ = "0.1.0"
