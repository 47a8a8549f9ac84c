from setuptools import find_packages, setup

setup(
    name='epas_clustering',
    version='0.1.0',
    packages=find_packages(exclude=['tests', 'dev_scripts']),
    description='Parameterized approximation scheme for constrained (k, z)-clustering in metrics of bounded '
                'scatter dimension, with exhaustive oracles, coreset audits and seeded benchmarks.',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    license='MIT',
    install_requires=[
        'numpy',
        'pandas',
        'progressbar2',
        'python-dotenv',
        'networkx',
        'scipy',
        'pydantic>=2',
    ],
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
    ],
    python_requires='>=3.10',
    keywords='clustering k-median k-means approximation-scheme capacitated fair matroid',
    entry_points={
        'console_scripts': [
            'epas-clustering=epas_clustering.cli:main',
        ],
    },
)
