import numpy as np
import pytest

import sectorcalc as sc


@pytest.fixture(scope="session")
def grid16():
    return sc.TorusGrid(n=1, points=16)


@pytest.fixture(scope="session")
def grid32():
    return sc.TorusGrid(n=1, points=32)


@pytest.fixture(scope="session")
def grid2d():
    return sc.TorusGrid(n=2, points=8)


@pytest.fixture(scope="session")
def sector_right():
    return sc.Sector(theta=np.pi / 2)


@pytest.fixture(scope="session")
def var_laplace():
    return sc.parse_symbol("(2+sin(x1))*(1+xi1^2)", n=1)


@pytest.fixture(scope="session")
def var_laplace_shifted(var_laplace):
    return sc.shift(var_laplace, 5.0)


@pytest.fixture(scope="session")
def params_order2():
    return sc.SymbolClassParams(m=2.0)


@pytest.fixture(scope="session")
def calc32(var_laplace_shifted, grid32, params_order2, sector_right):
    return sc.ParametrixCalculator(var_laplace_shifted, grid32, params_order2,
                                   sector_right, N=3)
