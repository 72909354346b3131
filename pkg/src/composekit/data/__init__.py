from composekit.data.coco import AnnotationRecord, InstanceAnnotation, load_coco_annotations
from composekit.data.filters import FilterConfig, filter_instances
from composekit.data.palette import Palette
from composekit.data.scene import SceneInput, blur, build_scene_input, erase_person, render_layout

__all__ = [
    "AnnotationRecord",
    "InstanceAnnotation",
    "load_coco_annotations",
    "FilterConfig",
    "filter_instances",
    "Palette",
    "SceneInput",
    "blur",
    "build_scene_input",
    "erase_person",
    "render_layout",
]
