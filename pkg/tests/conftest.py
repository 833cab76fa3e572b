import numpy as np
import pytest

from pathlens.dataset import EncodedMatrix
from pathlens.model_spec import builtin_recall_model, parse_model_spec, validate_model


@pytest.fixture(scope="session")
def builtin_model():
    return validate_model(builtin_recall_model())


SINGLE_INDICATOR_TEXT = """\
construct A formative
  indicator a numeric
construct B formative
  indicator b numeric
construct C formative
  indicator c numeric
construct Y reflective
  indicator recall binary-outcome
path A -> Y
path B -> Y
path C -> Y
"""

TWO_CONSTRUCT_TEXT = """\
construct X formative
  indicator x numeric
construct Y reflective
  indicator recall binary-outcome
path X -> Y
"""


@pytest.fixture(scope="session")
def single_indicator_model():
    return validate_model(parse_model_spec(SINGLE_INDICATOR_TEXT))


@pytest.fixture(scope="session")
def two_construct_model():
    return validate_model(parse_model_spec(TWO_CONSTRUCT_TEXT))


def matrix_from_columns(columns: dict, study: str = "s1") -> EncodedMatrix:
    """Build an EncodedMatrix with uniform row provenance for tests."""
    names = list(columns)
    values = np.column_stack([np.asarray(columns[c], dtype=np.float64) for c in names])
    meta = [(study, f"p{i}", f"o{i}") for i in range(values.shape[0])]
    return EncodedMatrix(values=values, column_names=names, row_meta=meta)
