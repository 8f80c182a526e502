"""Shared builders for hand-crafted corpora."""

import pytest

from dialogsat.corpus import AnnotatorRating, Corpus, Dialogue, Segment, Turn


def make_turn(
    index=1,
    user_text="play latest hits",
    system_text="shuffling from your playlist",
    timestamp_s=None,
    asr_confidence=0.9,
    nlu_intent="music.play",
    nlu_confidence=0.9,
    nlu_domain="music",
    ratings=(4, 4, 4),
    user_rating=None,
):
    return Turn(
        index=index,
        user_text=user_text,
        system_text=system_text,
        timestamp_s=float(10 * (index - 1)) if timestamp_s is None else timestamp_s,
        asr_confidence=asr_confidence,
        nlu_intent=nlu_intent,
        nlu_confidence=nlu_confidence,
        nlu_domain=nlu_domain,
        annotations=tuple(
            AnnotatorRating(annotator_id=f"annot_{k + 1}", rating=r)
            for k, r in enumerate(ratings)
        ),
        user_rating=user_rating,
    )


def make_dialogue(dialogue_id="dlg_0", segment=Segment.SINGLE_TURN, domain="music", turns=None):
    if turns is None:
        turns = (make_turn(),)
    return Dialogue(dialogue_id=dialogue_id, segment=segment, domain=domain, turns=tuple(turns))


@pytest.fixture
def tiny_corpus():
    single = make_dialogue("dlg_single", Segment.SINGLE_TURN, "music", (make_turn(ratings=(5, 5, 4)),))
    multi = make_dialogue(
        "dlg_multi",
        Segment.MULTI_TURN,
        "calendar",
        (
            make_turn(
                1,
                user_text="cancel my evening appointment",
                system_text="sorry i don't know that one",
                nlu_intent="calendar.cancel",
                nlu_domain="calendar",
                ratings=(1, 2, 1),
            ),
            make_turn(
                2,
                user_text="cancel my 7pm event if it is raining today",
                system_text="alright 7pm event park visit canceled",
                nlu_intent="calendar.cancel",
                nlu_domain="calendar",
                ratings=(5, 5, 5),
            ),
        ),
    )
    new_skill = make_dialogue(
        "dlg_new",
        Segment.NEW_SKILL,
        "stargazing",
        (
            make_turn(
                1,
                user_text="chart tonight's stars",
                system_text="charting tonight's stars",
                nlu_intent="stargazing.chart",
                nlu_domain="stargazing",
                ratings=(4, 4, 5),
            ),
            make_turn(
                2,
                user_text="show me saturn",
                system_text="showing saturn",
                nlu_intent="stargazing.show",
                nlu_domain="stargazing",
                ratings=(4, 5, 4),
            ),
        ),
    )
    return Corpus(dialogues=(single, multi, new_skill), metadata={"name": "tiny"})
