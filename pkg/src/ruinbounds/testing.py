from plone.testing import zca

import doctest
import ruinbounds

RUINBOUNDS_FIXTURE = zca.ZCMLSandbox(
    bases=(zca.LAYER_CLEANUP,),
    filename="configure.zcml",
    package=ruinbounds,
    name="ruinbounds:Fixture",
)

optionflags = doctest.NORMALIZE_WHITESPACE | doctest.ELLIPSIS
