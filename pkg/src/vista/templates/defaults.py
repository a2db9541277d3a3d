"""Default criterion, aspect, and metric texts plus the block builders that
inject them into the prompt templates.

These blocks are the default bindings for the template placeholders that are
configurable at run time (selection criteria, probing aspects, judge metric
lists, evaluation criteria, planning constraints). Modules with custom
configuration rebuild the same blocks from their own lists.
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

# --- Step 1: planning -------------------------------------------------------

SCENE_TEMPLATE_JSON = (
    '{"duration_seconds": <number>, "scene_type": "<text>", "characters": "<text>", '
    '"actions": "<text>", "dialogues": "<text>", "visual_environment": "<text>", '
    '"camera": "<text>", "sounds": "<text>", "moods": "<text>"}'
)

# Constraint lines keyed by the planner's toggle flags. The single-scene rule
# is unconditional.
PLANNING_CONSTRAINT_LINES = {
    "realism": (
        "- The video must be non-cartoon obeying real-world physics, unless the User "
        "Prompt explicitly specifies otherwise such as it is cartoon/animated.",
    ),
    "relevancy": (
        "- Only include elements explicitly required or clearly implied by the User Prompt.",
        "- Do not invent characters, dialogue, or music unless the prompt explicitly "
        "requires or implicitly implies them.",
        "- Avoid introducing unnecessary complexity or adding elements that are not "
        "explicitly required by the User Prompt.",
    ),
    "ambient_sound_encouraged": (
        "- You may include natural sounds or sound effects that naturally support the "
        "environment or actions.",
    ),
    "transition_discouraged": (
        "- Avoid excessive scene transitions; they are discouraged for simple or short prompts.",
    ),
}

SINGLE_SCENE_RULE_LINE = (
    "- If the video duration is short, or the User Prompt is simple, or the User Prompt "
    "explicitly specifies that the video has a single scene, then generate a single scene."
)


def planning_constraints_block(enabled_flags: Iterable[str] | None = None) -> str:
    """Render the Important Constraints lines for the enabled flags.

    ``None`` enables everything. The single-scene rule is always present.
    """
    if enabled_flags is None:
        flags = list(PLANNING_CONSTRAINT_LINES)
    else:
        flags = [f for f in PLANNING_CONSTRAINT_LINES if f in set(enabled_flags)]
    lines: list[str] = []
    for flag in flags:
        lines.extend(PLANNING_CONSTRAINT_LINES[flag])
    lines.append(SINGLE_SCENE_RULE_LINE)
    return "\n".join(lines)


# --- Step 2: probing and pairwise selection ---------------------------------

DEFAULT_PROBING_ASPECTS = (
    (
        "adherence_to_user_prompt",
        "Adherence to User Prompt",
        "What is wrong with the video in meeting the requirements and intent of the User Prompt?",
    ),
    (
        "sudden_appearances_disappearances",
        "Sudden Appearances/Disappearances",
        "What is wrong with the video regarding sudden appearances or disappearances of "
        "objects or characters? Do any elements appear or vanish in a way that violates "
        "real-world physics?",
    ),
    (
        "unnatural_movement_speed",
        "Unnatural Movement Speed",
        "What is wrong with the video regarding the movement speeds of objects or characters?",
    ),
    (
        "unnatural_movement_direction",
        "Unnatural Movement Direction",
        "What is wrong with the video regarding the directions of movement for objects or characters?",
    ),
    (
        "text_overlays",
        "Text Overlays",
        "Are there any texts, captions, or subtitles visible, unless explicitly required "
        "by the User Prompt?",
    ),
    (
        "music_human_voice_overs",
        "Music/Human Voice-Overs",
        "Is there any music or voice-over present that was not explicitly required or "
        "implicitly implied by the user prompt?",
    ),
    (
        "camera",
        "Camera",
        "What is wrong with the video regarding camera work?",
    ),
    (
        "unnecessary_scene_transitions",
        "Unnecessary Scene Transitions",
        "What is wrong with the video regarding scene transitions? Are there multiple or "
        "frequent changes in scenes that are not essential to the video's content or purpose?",
    ),
)


def probing_aspects_block(aspects: Sequence[tuple[str, str, str]]) -> str:
    return "\n\n".join(f"- {title}: {question}" for _, title, question in aspects)


DEFAULT_SELECTION_CRITERIA = (
    (
        "visual_fidelity",
        "Visual Fidelity",
        "Which video has fewer non-realistic elements (e.g., distorted faces, impossible "
        "physics, sudden object appearances or disappearances, AI artifacts)? (If both are "
        "equally realistic and well-presented, mark TIE.)",
    ),
    (
        "physical_commonsense",
        "Physical Commonsense",
        "Which video's character actions, environmental setting, events, movements, and "
        "dialogue (if any) are more internally logical and plausible given the scene "
        "description? (If both are equally logical, mark TIE.)",
    ),
    (
        "text_video_alignment",
        "Text-Video Alignment",
        "Which video more accurately matches and satisfies the provided User Prompt and "
        "requirements in terms of visuals, audio, activities, and constraints? (If both "
        "match equally, mark TIE.)",
    ),
    (
        "audio_video_alignment",
        "Audio-Video Alignment",
        "Which video's visuals align more perfectly with the audio track (including "
        "dialogue, sound effects, and background score)? (If both align equally, mark TIE.)",
    ),
    (
        "engagement",
        "Engagement",
        "Which video is more engaging for the intended target audience?",
    ),
)


def selection_criteria_block(criteria: Sequence[tuple[str, str, str]]) -> str:
    k = len(criteria)
    weight = f"{1.0 / k:g}"
    lines = []
    for i, (key, title, definition) in enumerate(criteria, start=1):
        lines.append(f"{i}. **{title}** [{key}] (Weight: {weight}): {definition}")
    return "\n".join(lines)


# --- Step 3: judge metric lists ---------------------------------------------

_VISUAL_NORMAL = (
    (
        "visual_fidelity",
        "Evaluate the technical quality and aesthetic alignment of the visuals. Focus on "
        "clarity, resolution (perceived vs. actual), unintended artifacts (subtle noise, "
        "flickering, compression issues), and whether the overall visual style and artistic "
        "choices (composition, lighting, color harmony) consistently and effectively convey "
        "the intended mood, genre, or artistic vision. For realistic content, assess for any "
        "'uncanny valley' effects that betray its artificial origin.",
    ),
    (
        "motions_and_dynamics",
        "Evaluate the smoothness and naturalness of motion for all elements (objects, "
        "characters, environmental features). Look for any unnatural jumps, stiffness, "
        "robotic movements, glitches, or inconsistencies in the flow of visual elements over "
        "time. Assess how well environmental elements react to forces and interact naturally. "
        "Comment on the appropriate application of motion blur and depth of field.",
    ),
    (
        "temporal_consistency",
        "Assess if visual elements (e.g., objects, characters, shapes, colors, lighting, "
        "environment) maintain consistent appearances, identities, and logical relationships "
        "throughout the scene video's duration. Look for elements popping in/out, changing "
        "attributes without justification, or deviations from the prompt's semantic meaning. "
        "Evaluate the stability and coherence of backgrounds and lighting conditions over "
        "time. This is primarily about object/character identity persistence.",
    ),
    (
        "camera_focus",
        "Evaluate the use and stability of camera focus throughout the video. Determine "
        "whether the focal point is clear and appropriately directed based on the scene's "
        "subject or action. Assess if focus shifts (rack focus, pull focus) are intentional "
        "and enhance narrative or aesthetic quality. Penalize erratic focus changes, overly "
        "shallow depth of field, or blurriness that undermines comprehension or distracts "
        "from key visual elements.",
    ),
    (
        "visual_safety",
        "Ensure the scene video avoids visually harmful or inappropriate content. This "
        "includes graphic violence, sexually explicit imagery, self-harm depictions, "
        "disturbing visuals (e.g., gore, unsettling distortions, hate symbols), or visual "
        "misinformation (e.g., doctored images, misleading representations of real events). "
        "Flag any problematic visual elements and suggest alternatives if possible to ensure "
        "the content is safe and responsible.",
    ),
)

_VISUAL_ADVERSARIAL = (
    ("visual_fidelity", "What is wrong with the technical quality and aesthetic alignment of the visuals?"),
    (
        "motions_and_dynamics",
        "What is wrong with the directions and speeds of movements for elements (objects, "
        "characters, environmental features)?",
    ),
    (
        "temporal_consistency",
        "What is wrong with the consistency of visual elements (e.g., objects, characters, "
        "shapes, colors, lighting, environment) throughout the video?",
    ),
    ("camera_focus", "What is wrong with the camera focus of the video?"),
    ("visual_safety", "What is wrong with the visual safety of the video?"),
)

_AUDIO_NORMAL = (
    (
        "audio_quality_cohesion",
        "Evaluate the overall technical quality and aesthetic cohesion of all audio elements "
        "(dialogue, music, sound effects, ambience). Look for technical flaws (e.g., hiss, "
        "clipping, distortion), and assess how well the sound elements are mixed, balanced, "
        "and contribute to the scene video's intended mood and narrative. This includes "
        "evaluating clarity, richness, and artistic appropriateness of the soundscape, and "
        "whether audio elements are consistent in their quality and characteristics over time.",
    ),
    (
        "audio_sync_spatialization",
        "Assess how accurately audio events synchronize with corresponding visual actions "
        "and movements. Evaluate the effectiveness of audio spatialization - how well sound "
        "conveys direction, distance, and the physical space of the scene. Look for any "
        "noticeable delays, misalignments, or sounds that feel unnaturally placed or "
        "disconnected from their visual source.",
    ),
    (
        "audio_safety",
        "Ensure the audio avoids harmful or inappropriate content. This includes excessively "
        "loud or piercing sounds, sudden jump-scare noises (if not contextually appropriate "
        "and flagged), disturbing audio (e.g., realistic screams of pain, explicit sounds, "
        "hate speech, distressing noises), or audio misinformation (e.g., doctored voices, "
        "misleading sound effects). Flag any problematic audio elements and suggest "
        "alternatives if possible.",
    ),
)

_AUDIO_ADVERSARIAL = (
    (
        "audio_quality_cohesion",
        "What is wrong with the overall technical quality and aesthetic cohesion of all "
        "audio elements (dialogue, music, sound effects, ambience)?",
    ),
    (
        "audio_sync_spatialization",
        "What is wrong with the alignment between the audio events (sounds, musics, "
        "voice-over, if applicable) with corresponding visual actions and movements?",
    ),
    ("audio_safety", "What is wrong with the audio safety of the scene video?"),
)

_CONTEXT_NORMAL = (
    (
        "contextual_suitability",
        "Evaluate whether the character actions, environmental setting, events, and inferred "
        "dialogue are internally logical and plausible given their nature in the video "
        "context. For example, check if actions align with character traits, or if the "
        "environmental setting supports the activities. Identify anything that feels "
        "physically, socially, or situationally implausible within the scene's own world - "
        "even if it matches the prompt.",
    ),
    (
        "video_characters",
        "Assess whether all elements in the video, including characters, actions, objects, "
        "environmental details, and events, are necessary and contribute meaningfully to the "
        "video core message.",
    ),
    (
        "video_format",
        "Evaluates the visual resolution and smoothness of the first and last frames of a "
        "scene. A high score indicates both frames are visually clear and contextually "
        "effective.",
    ),
    (
        "video_prompt_alignment",
        "Evaluate how accurately and completely the video fulfills the User Prompt. Consider "
        "whether characters, actions, scripts, environment, camera, and sound described in "
        "the prompt are present and faithfully realized. Penalize omissions, additions, or "
        "deviations that misrepresent the intended scene.",
    ),
    (
        "physical_commonsense",
        "Evaluate the physical presence of objects and actions in the video that are "
        "unrealistic or break the immersion. This includes anatomical errors (e.g., extra "
        "fingers), objects physically appearing or disappearing weirdly, actions that defy "
        "physics without justification, and any other details that make the video feel "
        "artificial or poorly executed. Assign a score based on the frequency and severity "
        "of such elements, with 10 being no unrealistic elements and 1 being many or severe "
        "unrealistic elements.",
    ),
    (
        "timeline_and_transition",
        "Evaluate how smoothly the scene progresses across its timeline. Consider whether "
        "transitions between actions, events, and camera movements are coherent, fluid, and "
        "well-paced. A high score reflects a natural flow without abrupt cuts, confusing "
        "shifts, or temporal inconsistencies.",
    ),
    (
        "engagement",
        "Evaluate how emotionally or visually engaging the video is. Consider whether the "
        "pacing, visual composition, storytelling, and character performance capture "
        "attention and maintain viewer interest. A high score reflects a compelling and "
        "immersive experience, while a low score indicates dull, confusing, or emotionally "
        "flat content.",
    ),
)

_CONTEXT_ADVERSARIAL = (
    (
        "contextual_suitability",
        "What is not internally logical or plausible about the character actions, "
        "environmental setting, events, or inferred dialogue with respect to the video's "
        "context?",
    ),
    (
        "video_characters",
        "What is wrong with the necessity or relevance of characters, actions, objects, "
        "environmental details, or events in contributing to the video's core message?",
    ),
    (
        "video_format",
        "What is wrong with the visual resolution or smoothness of the first and last "
        "frames of the scene?",
    ),
    (
        "video_prompt_alignment",
        "What is wrong with how the video fulfills the User Prompt, including any missing, "
        "added, or misrepresented characters, actions, scripts, environment, camera, or sound?",
    ),
    (
        "physical_commonsense",
        "What is wrong with the physical presence of objects or actions in the video that "
        "appear unrealistic, break immersion, or deviate from common practices?",
    ),
    (
        "timeline_and_transition",
        "What is wrong with the smoothness or coherence of the scene's progression, "
        "transitions, or pacing across its timeline?",
    ),
    (
        "engagement",
        "What makes the video unengaging, emotionally flat, or visually dull?",
    ),
)

JUDGE_METRIC_DEFINITIONS = {
    ("visual", "normal"): _VISUAL_NORMAL,
    ("visual", "adversarial"): _VISUAL_ADVERSARIAL,
    ("audio", "normal"): _AUDIO_NORMAL,
    ("audio", "adversarial"): _AUDIO_ADVERSARIAL,
    ("context", "normal"): _CONTEXT_NORMAL,
    ("context", "adversarial"): _CONTEXT_ADVERSARIAL,
}

DEFAULT_CRITIQUE_METRICS = {
    "visual": tuple(key for key, _ in _VISUAL_NORMAL),
    "audio": tuple(key for key, _ in _AUDIO_NORMAL),
    "context": tuple(key for key, _ in _CONTEXT_NORMAL),
}


def metrics_block(metrics: Sequence[tuple[str, str]]) -> str:
    """Render the per-metric score/justification JSON skeleton for a judge."""
    body = {}
    for key, definition in metrics:
        body[key] = {"score": "1-10", "justification": definition}
    return json.dumps(body, indent=2, ensure_ascii=False)


# --- evaluation harness ------------------------------------------------------

DEFAULT_EVALUATION_CRITERIA = (
    (
        "visual_fidelity",
        "Visual Fidelity",
        "Evaluate the technical quality and aesthetic alignment of the visuals, focusing on "
        "clarity, resolution (perceived vs. actual), unintended artifacts (e.g., subtle "
        "noise, flickering, compression issues), and whether the overall visual style and "
        "artistic choices (e.g., composition, lighting, color harmony) consistently and "
        "effectively convey the intended mood, genre, or artistic vision. For realistic "
        "content, assess for any 'uncanny valley' effects that betray its artificial origin.",
    ),
    (
        "motions",
        "Motions",
        "Evaluate the smoothness and naturalness of motion for all elements (e.g., objects, "
        "characters, environmental features), looking for any unnatural jumps, stiffness, "
        "robotic movements, glitches, or inconsistencies in the flow of visual elements over "
        "time. Assess how well environmental elements react to forces and interact "
        "naturally, and comment on the appropriate application of motion blur and depth of "
        "field.",
    ),
    (
        "temporal_consistency",
        "Temporal Consistency",
        "Assess whether visual elements (e.g., objects, characters, shapes, colors, "
        "lighting, environment) maintain consistent appearances, identities, and logical "
        "relationships throughout the scene's duration. Look for elements popping in/out, "
        "changing attributes without justification, or deviations from the prompt's semantic "
        "meaning. Evaluate the stability and coherence of backgrounds and lighting "
        "conditions over time.",
    ),
    (
        "audio_quality",
        "Audio Quality",
        "Evaluate the overall technical quality and aesthetic cohesion of all audio elements "
        "(e.g., dialogue, music, sound effects, ambience). Look for technical flaws (e.g., "
        "hiss, clipping, distortion), and assess how well the sound elements are mixed, "
        "balanced, and contribute to the scene's intended mood and narrative. Consider "
        "clarity, richness, and artistic appropriateness of the soundscape, and whether "
        "audio elements are consistent in quality over time.",
    ),
    (
        "av_alignment",
        "Audio-Video Alignment",
        "Assess how accurately audio events synchronize with corresponding visual actions "
        "and movements. Evaluate the effectiveness of audio spatialization - how well sound "
        "conveys direction, distance, and the physical space of the scene. Look for any "
        "noticeable delays, misalignments, or sounds that feel unnaturally placed or "
        "disconnected from their visual source.",
    ),
    (
        "tv_alignment",
        "Prompt-Video Alignment",
        "Evaluate how accurately and completely the scene fulfills the specific content "
        "requirements of the scene prompt. Consider whether characters, actions, scripts, "
        "environment, camera, and sound described in the prompt are present and faithfully "
        "realized. Penalize omissions, additions, or deviations that misrepresent the "
        "intended scene.",
    ),
    (
        "context_suitability",
        "Context Suitability",
        "Evaluate whether the character actions, environmental setting, events, and inferred "
        "dialogue are internally logical and plausible given their nature in the scene "
        "context. Check if actions align with character traits, or if the environmental "
        "setting supports the activities. Identify anything that feels physically, socially, "
        "or situationally implausible within the scene's own world.",
    ),
    (
        "necessity",
        "Necessity",
        "Assess whether all elements in the scenes' characters, actions, objects, "
        "environmental details, and events are necessary and contribute meaningfully to the "
        "scene's core message.",
    ),
    (
        "physical_commonsense",
        "Physical Commonsense",
        "Evaluate the physical presence of objects and actions in the scene that are "
        "unrealistic or break immersion, including anatomical errors (e.g., extra fingers), "
        "objects physically appearing or disappearing weirdly, actions that defy physics "
        "without justification, or other details that make the scene feel artificial or "
        "poorly executed.",
    ),
    (
        "scene_format",
        "Video Format",
        "Evaluate the visual resolution and smoothness of the first and last frames of the "
        "scene. A high score indicates both frames are visually clear and contextually "
        "effective.",
    ),
    (
        "engagement",
        "Engagement",
        "Evaluate how effectively the scene captivates and retains viewer attention through "
        "compelling visuals, audio, and narrative elements. Assess the emotional impact, "
        "pacing, and ability to draw viewers into the scenes' story or atmosphere, "
        "considering whether the scene maintains interest throughout its duration without "
        "feeling dull or overly chaotic.",
    ),
    (
        "safety",
        "Safety",
        "Ensure the scene avoids visually harmful or inappropriate content, including "
        "graphic violence, sexually explicit imagery, self-harm depictions, disturbing "
        "visuals (e.g., gore, unsettling distortions, hate symbols), or visual "
        "misinformation (e.g., doctored images, misleading representations of real events). "
        "Flag any problematic visual elements.",
    ),
    (
        "transition",
        "Transition",
        "Evaluate the smoothness, coherence, and appropriateness of transitions between "
        "scenes, shots, or segments within the video or sequence. Assess whether transitions "
        "(e.g., cuts, fades, dissolves, wipes) are abrupt, unpleasant, or visually and "
        "contextually suitable.",
    ),
)


def evaluation_criteria_block(criteria: Sequence[tuple[str, str, str]]) -> str:
    return "\n".join(
        f"* **{title}** [{key}]: {definition}" for key, title, definition in criteria
    )


def evaluation_output_block(keys: Sequence[str]) -> str:
    lines = ["{"]
    for i, key in enumerate(keys):
        comma = "," if i < len(keys) - 1 else ""
        lines.append(
            f'    "{key}": {{"Decision": "A_BETTER", "B_BETTER", or "TIE", "Explanation": ...}}{comma}'
        )
    lines.append("}")
    return "\n".join(lines)
