"""qCCS syntax: terms, binding analysis, parser and printer."""

from .ast import *  # noqa: F401,F403
from .analysis import LegalityReport, check_definition, check_legal, fresh, fv, is_closed, qv, substitute
from .parser import ParseError, parse_file, parse_process, parse_source, tokenize
from .printer import alpha_equivalent, expr_text, normal_form, source_text, to_text
