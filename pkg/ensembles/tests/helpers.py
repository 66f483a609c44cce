import numpy as np

from ensembles.ensemble_core import EnsembleState, Mode


def aligned(counts, class_phases, time=0.0):
    """Aligned ensemble laid out class by class."""
    beables = np.repeat(np.arange(len(counts)), counts)
    return EnsembleState(beables, np.asarray(class_phases, dtype=float)[beables], len(counts), time=time)


def per_member(beables, phases, dim):
    return EnsembleState(beables, phases, dim, mode=Mode.PER_MEMBER)
