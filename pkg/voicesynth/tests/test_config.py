import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase
from pydantic import ValidationError

from voicesynth.config import (
    BAND_PRESETS, FRAMING_PRESETS, CropSpec, ExperimentConfig, FeatureConfig, VocoderConfig, build_config,
    load_config,
)
from voicesynth.exceptions import SpecError


class ProfileTests(SimpleTestCase):

    def test_full_profile_defaults(self):
        config = build_config()
        self.assertEqual(config.profile, 'full')
        self.assertEqual(config.feature.hop_samples, 240)
        self.assertEqual(config.feature.window_samples, 960)
        self.assertEqual(config.acoustic.hidden, 384)
        self.assertEqual(config.vocoder.dilations, [2 ** i for i in range(10)])
        self.assertEqual(config.vocoder.aux_dims, 82)
        self.assertEqual(config.ml_discriminator.crops.lengths_samples, [12000, 24000, 36000, 48000])
        self.assertEqual(config.sf_discriminator.bands.bands, ((0, 40), (20, 60), (40, 80)))

    def test_tiny_profile(self):
        config = build_config('tiny')
        self.assertEqual(config.acoustic.hidden, 64)
        self.assertEqual((config.acoustic.n_encoder_blocks, config.acoustic.n_decoder_blocks), (2, 2))
        self.assertEqual((config.vocoder.n_stacks, config.vocoder.n_layers_per_stack), (2, 6))
        self.assertEqual(config.acoustic_train.adv_start_step, 100)
        self.assertEqual(config.vocoder_train.adv_start_step, 200)

    def test_overrides_merge_section_by_section(self):
        config = build_config('tiny', {'acoustic': {'hidden': 32}})
        self.assertEqual(config.acoustic.hidden, 32)
        self.assertEqual(config.acoustic.n_encoder_blocks, 2)

    def test_unknown_profile_and_fields(self):
        with self.assertRaises(SpecError):
            build_config('huge')
        with self.assertRaises(ValidationError):
            build_config('tiny', {'acoustic': {'hiden': 32}})

    def test_json_round_trip(self):
        config = build_config('tiny', {'sf_discriminator': {'bands': BAND_PRESETS[5].bands}})
        again = ExperimentConfig.model_validate_json(config.model_dump_json())
        self.assertEqual(again, config)

    def test_load_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'config.json'
            path.write_text(json.dumps({'profile': 'tiny', 'vocoder': {'kernel': 9}}), encoding='utf-8')
            self.assertEqual(load_config(path).vocoder.kernel, 9)
            self.assertEqual(load_config(path).profile, 'tiny')
            self.assertEqual(load_config(path, profile='full').acoustic.hidden, 384)
        self.assertEqual(load_config().profile, 'full')


class ConsistencyTests(SimpleTestCase):

    def test_framing_presets(self):
        for preset in FRAMING_PRESETS.values():
            feature = FeatureConfig(**preset)
            self.assertEqual(feature.window_samples, 4 * feature.hop_samples)
        self.assertEqual(FeatureConfig(**FRAMING_PRESETS['12/3']).hop_samples, 144)

    def test_framing_must_be_whole_samples_at_four_to_one(self):
        with self.assertRaises(ValidationError):
            FeatureConfig(window_s=0.020, hop_s=0.004)
        with self.assertRaises(ValidationError):
            FeatureConfig(window_s=0.0000832, hop_s=0.0000208)

    def test_vocoder_shape_rules(self):
        with self.assertRaises(ValidationError):
            VocoderConfig(kernel=12)
        with self.assertRaises(ValidationError):
            VocoderConfig(upsample_factors=(4, 4, 16))
        self.assertEqual(VocoderConfig(use_f0=False).aux_dims, 81)

    def test_sections_must_agree(self):
        with self.assertRaises(ValidationError):
            build_config('full', {'vocoder': {'hop_samples': 120, 'upsample_factors': (4, 30)}})
        with self.assertRaises(ValueError):
            build_config('full', {'sf_discriminator': {'bands': [(0, 40), (40, 80)]}})

    def test_crop_sample_rate_follows_features(self):
        with self.assertRaises(ValidationError):
            build_config('full', {'ml_discriminator': {'crops': {'sample_rate': 24000}}})
        self.assertEqual(CropSpec(lengths_s=(0.5,)).lengths_samples, [24000])

    def test_gate_inside_training_run(self):
        with self.assertRaises(ValidationError):
            build_config('tiny', {'vocoder_train': {'steps': 100}})
