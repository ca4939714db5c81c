"""Experiment procedures: Zeno phase gate, telegraph heralding, photon source, repeat-until-success gate."""
