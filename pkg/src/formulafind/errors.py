"""Exception hierarchy shared across the package."""


class FormulaFindError(Exception):
    """Base class for all package errors."""


# --- tokenizing / encoding ---

class EncodeError(FormulaFindError):
    """Common base for every tokenize/encode failure."""


class EmptyExpression(EncodeError):
    pass


class UnbalancedBraces(EncodeError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f"unbalanced braces at position {position}")


class UnknownEscape(EncodeError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f"unknown escape sequence at position {position}")


class UnknownKeyword(EncodeError):
    def __init__(self, token: str, position: int = -1):
        self.token = token
        self.position = position
        super().__init__(f"keyword not in vocabulary: {token!r}")


class MalformedScript(EncodeError):
    def __init__(self, position: int, reason: str = "dangling script"):
        self.position = position
        super().__init__(f"{reason} at position {position}")


class UnbalancedStructure(EncodeError):
    pass


# --- vocabulary files ---

class VocabError(FormulaFindError):
    pass


class DuplicateKeyword(VocabError):
    def __init__(self, keyword: str):
        self.keyword = keyword
        super().__init__(f"duplicate keyword: {keyword!r}")


class DuplicateCode(VocabError):
    def __init__(self, code: int):
        self.code = code
        super().__init__(f"duplicate code: {code}")


class ReservedCodeCollision(VocabError):
    def __init__(self, keyword: str, code: int):
        self.keyword = keyword
        self.code = code
        super().__init__(f"keyword {keyword!r} uses reserved code {code}")


class VocabParseError(VocabError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"vocabulary parse error on line {line}: {reason}")


# --- corpus ---

class DuplicateId(FormulaFindError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"duplicate record id: {record_id!r}")


class EmptyCorpus(FormulaFindError):
    pass


class MissingClass(FormulaFindError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"corpus has no records with label {label}")


# --- model / serialization ---

class CodeOutOfRange(FormulaFindError):
    def __init__(self, code: int):
        self.code = code
        super().__init__(f"code {code} is not in the model's code table")


class BadMagic(FormulaFindError):
    pass


class VersionMismatch(FormulaFindError):
    def __init__(self, found: int, expected: int):
        super().__init__(f"format version {found}, expected {expected}")


class TruncatedFile(FormulaFindError):
    pass


class DimensionMismatch(FormulaFindError):
    pass


# --- retrieval ---

class EmptyDatabase(FormulaFindError):
    pass
