"""
Missing inputs inside a single layer
====================================

A nan_dense layer drops the weights of missing inputs and rescales its bias
by the observed fraction. The same pre-activation comes out if every
missing input is replaced by its neutralizer value.
"""
import numpy as np

from missnet.data import MaskedMatrix
from missnet.nn import Layer, export_neutralizers, forward, substituted_preactivation

rng = np.random.default_rng(0)
layer = Layer(rng.normal(size=(3, 4)), rng.normal(size=3), "tanh", "nan_dense", "promissing")

# two rows: one complete, one with the last two inputs unknown
X = MaskedMatrix(rng.normal(size=(2, 4)), [[False] * 4, [False, False, True, True]])
out, cache = forward(layer, X)
print("pre-activations\n", cache["z"])

# an all-missing row contributes nothing: the pre-activation is exactly zero
_, empty = forward(layer, MaskedMatrix(np.zeros((1, 4)), np.ones((1, 4), bool)))
print("all missing ->", empty["z"])

# neutralizers: one value per (neuron, input)
U = export_neutralizers(layer).U
print("neutralizer matrix\n", U)
print("substitution gives the same z:",
      np.allclose(substituted_preactivation(layer, X, U), cache["z"]))

# the m_promissing variant adds r/p times a trainable compensatory weight
mlayer = Layer(layer.W, layer.b, "tanh", "nan_dense", "m_promissing", np.array([0.5, -1.0, 2.0]))
_, mcache = forward(mlayer, X)
print("compensated row 2:", mcache["z"][1], "vs", cache["z"][1])
