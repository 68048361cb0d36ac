"""Descriptor featurization and single/multi-task property models for
CHNOClF energetic molecules.

Public surface:

- :mod:`emprops.molgraph` -- SMILES parsing, ring perception, substructure
  matching.
- :mod:`emprops.descriptors` -- descriptor suite, feature schema, featurize.
- :mod:`emprops.dataset` -- property channels, CSV ingestion, splits,
  standardization, correlation analysis.
- :mod:`emprops.mtnn` -- selector-vector multi-task dense network (the
  single-task network is the selector-free special case).
- :mod:`emprops.forest` -- single-task random forest regressor.
- :mod:`emprops.evaluation` -- metrics, cross-validation protocol, reports.
- :mod:`emprops.cli` -- command line entry point.
"""

__version__ = "0.1.0"
