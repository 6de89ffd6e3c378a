"""Default prompt templates for the live endpoint.

These are placeholders meant to be overridden through ``ScorerBinding.prompts``;
any key left out falls back to the template here. Templates use
``str.format`` fields.
"""

EXTRACT = (
    "You help a household robot plan a search. Read the question and reply with "
    "JSON only, shaped as "
    '{{"regions": ["<room>", ...], "targets": [["<object>", "<room>"], ...]}}.\n'
    "Known rooms: {rooms}\n"
    "Question: {question}"
)

REGION = (
    "A robot sees the following view. Which one of these rooms is it looking at? "
    "Known rooms: {rooms}\n"
    "View: {observation}\n"
    "Reply with the room name only."
)

RELEVANCE = (
    "Question: {question}\n"
    "View: {observation}\n"
    "Does this view contain enough evidence to help answer the question? "
    "Reply yes or no."
)

STOP = (
    "Question: {question}\n"
    "Retained views:\n{snapshots}\n"
    "Is the information above sufficient to answer the question? "
    "{exhaustive}"
    "Reply yes or no."
)

STOP_EXHAUSTIVE = (
    "This question asks about counting or whether something exists, so only reply "
    "yes once the whole home has been searched. "
)

ANSWER_MC = (
    "Question: {question}\n"
    "Options:\n{options}\n"
    "Retained views:\n{snapshots}\n"
    "{reasoning}"
    "End with a final line of the form 'Answer: <letter>'."
)

ANSWER_OPEN = (
    "Question: {question}\n"
    "Retained views:\n{snapshots}\n"
    "{reasoning}"
    "End with a final line of the form 'Answer: <short answer>'."
)

COT = "Think step by step, citing the views you rely on, before giving the answer.\n"

DEFAULTS = {
    "extract": EXTRACT,
    "region": REGION,
    "relevance": RELEVANCE,
    "stop": STOP,
    "stop_exhaustive": STOP_EXHAUSTIVE,
    "answer_mc": ANSWER_MC,
    "answer_open": ANSWER_OPEN,
    "cot": COT,
}


def get(prompts, key):
    if prompts and key in prompts:
        return prompts[key]
    return DEFAULTS[key]
