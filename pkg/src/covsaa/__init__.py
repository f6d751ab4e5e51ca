"""
@File       : __init__.py
@Description: 残差 SAA：带协变量两阶段随机规划的数据驱动近似

@Time       : 2026/01/06 19:58
@Author     : hcy18
"""

__version__ = "0.1.0"
