"""Privacy-enhanced emotion recognition on an edge/cloud split.

Modules: ``corpus`` (feature files, synthetic data), ``tensor`` (dense
helpers and the seeded PRNG), ``nn`` (layers with manual gradients),
``model`` (the adversarial encoder), ``baselines`` (PCA, plain autoencoder),
``evaluate`` (SMO SVM, LOSO, attacks, reports), ``wire`` and ``edgecloud``
(the networked pipeline) and ``cli``.
"""

__version__ = "0.1.0"
