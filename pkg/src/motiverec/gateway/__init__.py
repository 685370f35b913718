from .backends import HttpBackend, MockBackend
from .core import Gateway, GenerationRequest, GenerationResponse
from .parsing import ReflectVerdict, parse_query_list, parse_reflect_verdict
from .templates import PromptTemplate, load_templates

__all__ = [
    "Gateway", "GenerationRequest", "GenerationResponse", "HttpBackend", "MockBackend",
    "PromptTemplate", "ReflectVerdict", "load_templates", "parse_query_list", "parse_reflect_verdict",
]
