"""aisette: a contract-checked functional language with SMT validation, typed wire forms and a discovery runtime."""

__version__ = "0.1.0"
