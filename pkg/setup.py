from setuptools import setup, find_packages

setup(
    name='PromptEvo',
    version='0.1',
    packages=find_packages(exclude=['test', 'test.*']),
    install_requires=[
        'requests',
        'jsonschema',
        'numpy',
        'sacrebleu',
        'scikit-learn',
        'rich'
    ],
    entry_points={
        'console_scripts': [
            'promptevo=PromptEvo.__main__:main',
        ],
    },
)
