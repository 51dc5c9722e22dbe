from plone.testing import layered
from plone.testing.zca import UNIT_TESTING
from ruinbounds.testing import optionflags

import doctest
import unittest

test_files = [
    "../bounds.txt",
    "../config.txt",
]


def test_suite():
    tests = [
        layered(
            doctest.DocFileSuite(
                test_file,
                optionflags=optionflags,
                encoding="utf-8",
            ),
            layer=UNIT_TESTING,
        )
        for test_file in test_files
    ]

    return unittest.TestSuite(tests)
