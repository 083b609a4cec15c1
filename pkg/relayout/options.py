#
# Copyright 2026 by the ReLayout developers
# All rights reserved
#

"""
Option sets with validated attributes.

Every configuration object in relayout derives from :class:`Options`.
Only declared attributes may be set, which catches typos, and every
attribute is a property whose setter validates the new value::

    >>> cfg = PretrainConfig()
    >>> cfg.p_mlm = 1.5
    ValueError: p_mlm must be in [0, 1], got 1.5
    >>> cfg.p_mln = 0.1
    ValueError: Attempted to set unknown attribute p_mln

Cross-field constraints are checked by :meth:`Options.sanity_check`.
The JSON record of an option set is :meth:`Options.to_dict`.
"""

import copy
import numbers
import six


def option(name, check, message):
    """
    Build a validating property for option ``name``.

    :param name: public attribute name
    :param check: callable returning True for acceptable values
    :param message: completes the sentence "``name`` must ..."
    """
    private = '_{}'.format(name)

    def getter(self):
        return getattr(self, private)

    def setter(self, value):
        if not check(value):
            raise ValueError(
                '{} must {}, got {!r}'.format(name, message, value))
        setattr(self, private, value)

    return property(getter, setter)


#
# validators
#
def is_bool(value):
    return value in [True, False] and isinstance(value, bool)


def is_int(value):
    return (isinstance(value, numbers.Integral) and
            not isinstance(value, bool))


def is_real(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def is_probability(value):
    return is_real(value) and 0.0 <= value <= 1.0


def is_positive_int(value):
    return is_int(value) and value > 0


def is_non_negative_int(value):
    return is_int(value) and value >= 0


def is_non_negative(value):
    return is_real(value) and value >= 0


def is_positive(value):
    return is_real(value) and value > 0


def is_int_range(value):
    try:
        lo, hi = value
    except (TypeError, ValueError):
        return False
    return is_int(lo) and is_int(hi) and 0 <= lo <= hi


def is_optional_string(value):
    return value is None or isinstance(value, six.string_types)


def one_of(*choices):
    def check(value):
        return value in choices
    return check


class Options(object):
    """
    Base class for option sets.

    Subclasses declare ``_fields_`` as ``(name, default)`` pairs and a
    property (usually from :func:`option`) for each name.
    """
    _fields_ = ()

    def __setattr__(self, name, value):
        # only declared attributes may be set, all others
        # raise an error, which catches typos
        allowed_attributes = [item for item, _ in self._fields_]
        allowed_attributes += ['_{}'.format(item) for
                               item in allowed_attributes]
        if name not in allowed_attributes:
            raise ValueError(
                'Attempted to set unknown attribute {}'.format(name))
        else:
            object.__setattr__(self, name, value)

    def __init__(self, **kwargs):
        for name, default in self._fields_:
            setattr(self, name, copy.deepcopy(default))
        for name, value in six.iteritems(kwargs):
            setattr(self, name, value)

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return '{}({})'.format(
            type(self).__name__,
            ', '.join('{}={!r}'.format(k, v)
                      for k, v in sorted(six.iteritems(self.to_dict()))))

    def sanity_check(self):
        """Check constraints involving more than one field."""
        pass

    def copy(self, **overrides):
        """Return a validated copy with some fields replaced."""
        values = self.to_dict()
        values.update(overrides)
        return self.from_dict(values)

    def to_dict(self):
        result = {}
        for name, _ in self._fields_:
            value = getattr(self, name)
            if isinstance(value, Options):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)
            result[name] = copy.deepcopy(value)
        return result

    @classmethod
    def from_dict(cls, values):
        """
        Build an option set from its JSON record.

        :param values: dict of option values; missing keys keep defaults
        :raises ValueError: on unknown keys or invalid values
        """
        if not isinstance(values, dict):
            raise ValueError(
                '{} must be a JSON object'.format(cls.__name__))
        known = [name for name, _ in cls._fields_]
        for key in values:
            if key not in known:
                raise ValueError(
                    'Unknown option "{}" for {}; valid options are {}'.format(
                        key, cls.__name__, ', '.join(sorted(known))))
        options = cls(**values)
        options.sanity_check()
        return options
