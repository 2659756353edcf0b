import pytest

from d3lab.arith import sieve_dk


@pytest.fixture(scope="session")
def d3_table_1e6():
    return sieve_dk(3, 10**6)


@pytest.fixture(scope="session")
def d3_table_1e5():
    return sieve_dk(3, 10**5)


@pytest.fixture(scope="session")
def d3_table_1e4(d3_table_1e5):
    # prefix of the larger table; progression sums only read n <= x
    return d3_table_1e5


@pytest.fixture(scope="session")
def d2_table_1e4():
    return sieve_dk(2, 10**4)
