"""Experiment configuration files.

A configuration is an XML document whose root ``experiment`` element lives
in the ``urn:ruinbounds:experiment:1`` namespace. Each child element names
one field of ``IExperimentConfig``; list values are written as nested
``<element>`` children::

    <experiment xmlns="urn:ruinbounds:experiment:1">
      <dimension>2</dimension>
      <k>2</k>
      <thresholds><element>1.0</element><element>1.0</element></thresholds>
    </experiment>
"""

from copy import copy
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as distribution_version
from lxml import etree
from pathlib import Path
from plone.supermodel.utils import elementToValue
from plone.supermodel.utils import noNS
from ruinbounds.interfaces import ConfigError
from ruinbounds.interfaces import EXPERIMENT_NAMESPACE
from ruinbounds.interfaces import EXPERIMENT_ROOT
from ruinbounds.interfaces import IExperimentConfig
from zope.interface import implementer
from zope.interface import Invalid
from zope.schema import getFieldsInOrder
from zope.schema import getValidationErrors
from zope.schema.fieldproperty import createFieldProperties

import hashlib
import logging

logger = logging.getLogger(__name__)

CONFIG_DIRECTORY = Path(__file__).parent / "configs"
MATRIX_PATTERN = "matrix-*.xml"

# Output locations do not influence results and stay out of the fingerprint
UNFINGERPRINTED = ("report", "csv")

SWEEP_PARAMETERS = ("u", "T", "H", "rho", "k")


@implementer(IExperimentConfig)
class ExperimentConfig:
    createFieldProperties(IExperimentConfig)

    def __init__(self, **values):
        for name, value in values.items():
            setattr(self, name, value)

    def __repr__(self):
        return f"<ExperimentConfig {self.name!r} process={self.process}>"


def tool_version():
    try:
        return distribution_version("ruinbounds")
    except PackageNotFoundError:
        return "0.0.0.dev0"


def _tag(name):
    return f"{{{EXPERIMENT_NAMESPACE}}}{name}"


def _describe(error):
    """Readable message for zope.schema and invariant errors."""
    if isinstance(error, Invalid) and type(error).__doc__ and not error.args:
        return type(error).__doc__.strip().splitlines()[0]
    if isinstance(error, Invalid) and type(error) is not Invalid:
        args = ", ".join(str(arg) for arg in error.args if arg is not None)
        return f"{type(error).__name__}: {args}" if args else type(error).__name__
    return str(error)


def _strip(element):
    for node in element.iter(tag=etree.Element):
        if node.text is not None:
            node.text = node.text.strip()


def validation_errors(config, lines=None, skip=()):
    """(line, message) pairs for missing fields and broken invariants."""
    lines = lines or {}
    errors = []
    for name, error in getValidationErrors(IExperimentConfig, config):
        if name in skip:
            continue
        if name is None:
            errors.append((lines.get(None), _describe(error)))
        else:
            errors.append(
                (lines.get(name, lines.get(None)), f"{name}: {_describe(error)}")
            )
    return errors


def parse_config(data, filename=None):
    """Build a validated ExperimentConfig from XML bytes."""
    parser = etree.XMLParser(remove_comments=True)
    try:
        root = etree.fromstring(data, parser)
    except etree.XMLSyntaxError as e:
        raise ConfigError([(e.lineno, e.msg)], filename) from e
    if root.tag != _tag(EXPERIMENT_ROOT):
        raise ConfigError(
            [
                (
                    root.sourceline,
                    f"root element must be <{EXPERIMENT_ROOT}> in the "
                    f"{EXPERIMENT_NAMESPACE} namespace",
                )
            ],
            filename,
        )
    fields = dict(getFieldsInOrder(IExperimentConfig))
    config = ExperimentConfig()
    lines = {None: root.sourceline}
    failed = set()
    errors = []
    for child in root.iterchildren(tag=etree.Element):
        name = noNS(child.tag)
        if child.tag != _tag(name):
            errors.append(
                (child.sourceline, f"<{name}> is not in the experiment namespace")
            )
            continue
        field = fields.get(name)
        if field is None:
            errors.append((child.sourceline, f"unknown element <{name}>"))
            continue
        if name in lines:
            errors.append((child.sourceline, f"<{name}> given twice"))
            continue
        lines[name] = child.sourceline
        _strip(child)
        try:
            setattr(config, name, elementToValue(field, child))
        except (Invalid, ValueError, TypeError) as e:
            failed.add(name)
            errors.append((child.sourceline, f"{name}: {_describe(e)}"))
    for name in fields:
        if name not in lines:
            logger.debug("Configuration element <%s> not given, using default", name)
    errors.extend(validation_errors(config, lines, skip=failed))
    if errors:
        raise ConfigError(errors, filename)
    return config


def load_config(path):
    path = Path(path)
    return parse_config(path.read_bytes(), str(path))


def _value_element(name, value):
    element = etree.Element(_tag(name))
    if isinstance(value, (list, tuple)):
        for item in value:
            element.append(_value_element("element", item))
    elif isinstance(value, float):
        element.text = repr(value)
    else:
        element.text = str(value)
    return element


def config_element(config, include_outputs=True):
    root = etree.Element(_tag(EXPERIMENT_ROOT), nsmap={None: EXPERIMENT_NAMESPACE})
    for name, _ in getFieldsInOrder(IExperimentConfig):
        value = getattr(config, name)
        if value is None or (not include_outputs and name in UNFINGERPRINTED):
            continue
        root.append(_value_element(name, value))
    return root


def serialize_config(config):
    """Pretty XML that parses back to an equal configuration."""
    return etree.tostring(
        config_element(config),
        pretty_print=True,
        xml_declaration=True,
        encoding="utf-8",
    )


def fingerprint(config):
    """SHA-256 of the canonical configuration plus the tool version."""
    canonical = etree.tostring(
        config_element(config, include_outputs=False), method="c14n"
    )
    digest = hashlib.sha256(canonical)
    digest.update(b"\n" + tool_version().encode("utf-8"))
    return digest.hexdigest()


def validated(config, filename=None):
    errors = validation_errors(config)
    if errors:
        raise ConfigError(errors, filename)
    return config


def apply_overrides(config, seed=None, n_paths=None, resolution=None):
    """Copy of the configuration with command-line overrides applied."""
    config = copy(config)
    try:
        if seed is not None:
            config.seed = int(seed)
        if n_paths is not None:
            config.n_paths = int(n_paths)
        if resolution is not None:
            config.resolutions = [int(resolution)]
    except Invalid as e:
        raise ConfigError([(None, _describe(e))]) from e
    return validated(config)


def with_parameter(config, parameter, value):
    """Copy of the configuration with one sweep parameter set."""
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(
            f"unknown sweep parameter {parameter!r}, expected one of {SWEEP_PARAMETERS}"
        )
    config = copy(config)
    value = float(value)
    try:
        if parameter == "u":
            config.u_values = [value]
        elif parameter == "T":
            config.horizon = value
            if config.horizons:
                config.horizons = [value] * len(config.horizons)
        elif parameter == "H":
            if not config.hurst:
                raise ConfigError(
                    [(None, f"process {config.process} has no Hurst index")]
                )
            config.hurst = [value] * len(config.hurst)
        elif parameter == "rho":
            config.mixing = None
            config.correlation = value
        else:
            config.k = int(value)
    except Invalid as e:
        raise ConfigError([(None, f"{parameter}={value:g}: {_describe(e)}")]) from e
    return validated(config)


def shipped_configs(pattern=MATRIX_PATTERN):
    """Paths of the configurations that ship with the package."""
    return sorted(CONFIG_DIRECTORY.glob(pattern))
