"""Tests the file scenes"""
# pylint: disable=missing-docstring
# pylint: disable=no-self-use

import logging
import os
import tempfile
import unittest

import mpmath

from resurgix.helper import errors, scenes


class Test(unittest.TestCase):
    def setUp(self):
        logging.disable(logging.CRITICAL)

    def tearDown(self):
        logging.disable(logging.NOTSET)

    def test_short_bundled(self):
        names = scenes.bundled_scenes()
        for name in ['airy', 'gamma', 'gaussian', 'quartic']:
            self.assertIn(name, names)
        airy = scenes.read_scene('airy')
        self.assertEqual(airy.name, 'airy')
        self.assertEqual(airy.variables, ('z',))
        self.assertEqual(airy.seeds_per_axis, 5)
        self.assertEqual(airy.box[0], (mpmath.mpc(-10, -10), mpmath.mpc(10, 10)))
        self.assertEqual(airy.seed_box[0], (mpmath.mpc(-2, -2), mpmath.mpc(2, 2)))

    def test_short_read_file(self):
        with tempfile.TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'plane.scene')
            with open(filename, 'w') as f:
                f.write("[scene]\nvars = x, y\nf = x^2/2 + y^2/2\n"
                        "box = -1-1i : 1+1i; -2-2i : 2+2i\nseeds = 3\n")
            scene = scenes.read_scene(filename)
        self.assertEqual(scene.name, 'plane')
        self.assertEqual(scene.n, 2)
        self.assertEqual(scene.seed_box, scene.box)
        self.assertEqual(scene.box[1][1], mpmath.mpc(2, 2))
        self.assertEqual(str(scene.vol), '1')

    def test_short_missing_section(self):
        with tempfile.TemporaryDirectory() as directory:
            filename = os.path.join(directory, 'bad.scene')
            with open(filename, 'w') as f:
                f.write("[other]\nf = z\n")
            with self.assertRaises(errors.ResurgixError):
                scenes.read_scene(filename)

    def test_short_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            scenes.read_scene('no_such_scene')

    def test_short_default_box(self):
        scene = scenes.make_scene('z^2')
        self.assertEqual(scene.box, ((mpmath.mpc(-4, -4), mpmath.mpc(4, 4)),))
        self.assertTrue(scene.in_box((mpmath.mpc(3, -3),)))
        self.assertFalse(scene.in_box((mpmath.mpc(5, 0),)))
        self.assertTrue(scene.in_box((mpmath.mpc(5, 0),), margin=2))

    def test_short_empty_box(self):
        with self.assertRaises(errors.ResurgixError):
            scenes.make_scene('z^2', box=[(1 + 1j, -1 - 1j)])

    def test_short_parse_box(self):
        box = scenes.parse_box('-1,-2 : 3,4')
        self.assertEqual(box, [(mpmath.mpc(-1, -2), mpmath.mpc(3, 4))])
        with self.assertRaises(errors.ResurgixError):
            scenes.parse_box('1+1i')

    def test_short_to_json(self):
        data = scenes.read_scene('gamma').to_json()
        self.assertEqual(data['vars'], ['z'])
        self.assertEqual(data['vol'], '1/z')


if __name__ == '__main__':
    unittest.main()
